#include "ratkit/config.hpp"

#include <doctest.h>

using namespace ratkit;

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.tau == 0.95);
  CHECK(c.permutations == 199);
  CHECK(c.draws == 10);
  CHECK(c.alpha == 1.0);
  CHECK(c.budgets == std::vector<std::size_t>{1, 2, 3, 4, 5});
  CHECK(c.quartile_method == QuartileMethod::Linear);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config file parsing") {
  const RunConfig c = parse_config(
      "# analysis settings\n"
      "seed = 42\n"
      "alpha = 0.5   \n"
      "\n"
      "budgets = 1, 3,5\n"
      "quartile_method = nearest\n"
      "normalize = true\n");
  CHECK(c.seed == 42);
  CHECK(c.alpha == 0.5);
  CHECK(c.budgets == std::vector<std::size_t>{1, 3, 5});
  CHECK(c.quartile_method == QuartileMethod::Nearest);
  CHECK(c.normalize);
  CHECK(c.tau == 0.95);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("colour = red\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("seed = -1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("alpha\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("alpha = 1x\n"), ValidationError);
  CHECK_THROWS_AS(parse_quartile_method("median"), ValidationError);
  CHECK_THROWS_AS(parse_count_list(""), ValidationError);

  RunConfig bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = {};
  bad.tau = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = {};
  bad.draws = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("quartile method names round-trip") {
  for (auto m : {QuartileMethod::Linear, QuartileMethod::Exclusive, QuartileMethod::Nearest}) {
    CHECK(parse_quartile_method(to_string(m)) == m);
  }
}
