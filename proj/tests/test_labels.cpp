#include "ratkit/labels.hpp"

#include <doctest.h>

#include <random>

using namespace ratkit;

TEST_CASE("linear quartiles") {
  std::vector<double> s;
  for (int i = 0; i <= 10; ++i) s.push_back(i);
  CHECK(quantile(s, 0.25, QuartileMethod::Linear) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(quantile(s, 0.75, QuartileMethod::Linear) == doctest::Approx(7.5).epsilon(1e-15));
  CHECK(quantile({0, 10}, 0.25, QuartileMethod::Linear) == 2.5);
  CHECK(quantile({0, 10}, 0.75, QuartileMethod::Linear) == 7.5);
  CHECK(quantile({5, 5, 5, 5}, 0.25, QuartileMethod::Linear) == 5.0);
  CHECK(quantile({5, 5, 5, 5}, 0.75, QuartileMethod::Linear) == 5.0);
  CHECK(quantile({3, 1, 2}, 0.5, QuartileMethod::Linear) == 2.0);  // unsorted input
  CHECK_THROWS_AS(quantile({}, 0.5, QuartileMethod::Linear), ValidationError);
}

TEST_CASE("alternative quartile conventions") {
  const std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8};
  // (n+1)p - 1 = 1.25 -> 2.25 ; 5.75 -> 6.75
  CHECK(quantile(s, 0.25, QuartileMethod::Exclusive) == doctest::Approx(2.25));
  CHECK(quantile(s, 0.75, QuartileMethod::Exclusive) == doctest::Approx(6.75));
  // nearest rank: ceil(2) = 2 -> 2 ; ceil(6) = 6 -> 6
  CHECK(quantile(s, 0.25, QuartileMethod::Nearest) == 2.0);
  CHECK(quantile(s, 0.75, QuartileMethod::Nearest) == 6.0);
  CHECK(quantile({4.0}, 0.25, QuartileMethod::Exclusive) == 4.0);
}

TEST_CASE("binary votes use strict inequalities") {
  const AnnotatorProfile p{"a", 2.5, 7.5, 11};
  CHECK(binary_vote(9, p) == 1);
  CHECK(binary_vote(1, p) == 0);
  CHECK_FALSE(binary_vote(5, p).has_value());
  CHECK_FALSE(binary_vote(7.5, p).has_value());
  CHECK_FALSE(binary_vote(2.5, p).has_value());
}

TEST_CASE("supermajority aggregation") {
  CHECK(aggregate_label(std::vector<int>{1, 1, 1, 0}) == 1);
  CHECK_FALSE(aggregate_label(std::vector<int>{1, 0}).has_value());
  CHECK(aggregate_label(std::vector<int>{0, 0, 0, 0}) == 0);
  CHECK_FALSE(aggregate_label(std::vector<int>{1, 1, 0}).has_value());  // 2/3 < 75%
  CHECK_FALSE(aggregate_label(std::vector<int>{1}).has_value());        // below min votes
  CHECK(aggregate_label(std::vector<int>{1}, 1) == 1);
  CHECK_FALSE(aggregate_label(std::vector<int>{}).has_value());
}

TEST_CASE("reconstruction rejects a pair bound to two messages") {
  std::vector<AnnotationRecord> recs{{"p", "m1", "a", 1}, {"p", "m2", "b", 2}};
  CHECK_THROWS_AS(reconstruct_labels(recs), ValidationError);
}

TEST_CASE("two symmetric messages split one per side") {
  std::vector<LabeledPair> pairs{{"p1", "m1", 1, 2, 0}, {"p2", "m1", 0, 0, 2}, {"p3", "m2", 1, 2, 0}, {"p4", "m2", 0, 0, 2}};
  const auto s = message_disjoint_split(pairs, 0.5, 0.05, 1);
  CHECK(s.train.size() == 2);
  CHECK(s.test.size() == 2);
  CHECK(s.train_messages.size() == 1);
  CHECK(s.test_messages.size() == 1);
  CHECK(*s.train_messages.begin() != *s.test_messages.begin());
  CHECK(s.positive_rate_gap == 0.0);
  CHECK(s.balanced);
}

TEST_CASE("single message goes to one side and is flagged") {
  std::vector<LabeledPair> pairs{{"p1", "m1", 1, 2, 0}, {"p2", "m1", 0, 0, 2}};
  const auto s = message_disjoint_split(pairs, 0.2, 0.05, 1);
  CHECK(s.test.empty());
  CHECK(s.train.size() == 2);
  CHECK_FALSE(s.balanced);
}

TEST_CASE("split is message-disjoint and deterministic") {
  std::mt19937_64 rng(5);
  std::vector<LabeledPair> pairs;
  for (int m = 0; m < 20; ++m) {
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) {
      pairs.push_back({"p" + std::to_string(m) + "_" + std::to_string(i), "m" + std::to_string(m),
                       static_cast<int>(rng() % 2), 1, 1});
    }
  }
  const auto a = message_disjoint_split(pairs, 0.2, 0.05, 9);
  const auto b = message_disjoint_split(pairs, 0.2, 0.05, 9);
  for (const auto& m : a.test_messages) CHECK(a.train_messages.count(m) == 0);
  CHECK(a.train.size() + a.test.size() == pairs.size());
  CHECK(a.positive_rate_gap <= 0.05);
  CHECK(a.balanced);
  CHECK(a.test_messages == b.test_messages);
}
