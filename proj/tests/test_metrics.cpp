#include "ratkit/metrics.hpp"

#include <doctest.h>

#include <random>

using namespace ratkit;

namespace {

// Textbook Fleiss' kappa over a list of per-item rating vectors.
double fleiss_oracle(const std::vector<std::vector<int>>& ratings, int categories) {
  const double items = static_cast<double>(ratings.size());
  const double n = static_cast<double>(ratings[0].size());
  std::vector<double> pj(static_cast<std::size_t>(categories), 0.0);
  double pbar = 0.0;
  for (const auto& item : ratings) {
    std::vector<double> c(static_cast<std::size_t>(categories), 0.0);
    for (int r : item) c[static_cast<std::size_t>(r)] += 1.0;
    double agree = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      agree += c[j] * (c[j] - 1.0);
      pj[j] += c[j] / (items * n);
    }
    pbar += agree / (n * (n - 1.0)) / items;
  }
  double pe = 0.0;
  for (double p : pj) pe += p * p;
  return (pbar - pe) / (1.0 - pe);
}

Eigen::MatrixXi counts_of(const std::vector<std::vector<int>>& ratings, int categories) {
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(static_cast<Index>(ratings.size()), categories);
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    for (int r : ratings[i]) ++c(static_cast<Index>(i), r);
  }
  return c;
}

}  // namespace

TEST_CASE("classification metrics from a known confusion table") {
  // tp=3 fp=1 tn=4 fn=2
  const std::vector<int> pred{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  const std::vector<int> gold{1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
  const auto m = classification_metrics(pred, gold);
  CHECK(m.confusion.tp == 3);
  CHECK(m.confusion.fp == 1);
  CHECK(m.confusion.tn == 4);
  CHECK(m.confusion.fn == 2);
  CHECK(*m.precision.value == doctest::Approx(0.75));
  CHECK(*m.recall.value == doctest::Approx(0.6));
  CHECK(*m.specificity.value == doctest::Approx(0.8));
  CHECK(*m.balanced_accuracy.value == doctest::Approx(0.7));
  CHECK(*m.f1.value == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
}

TEST_CASE("undefined ratios carry a reason") {
  const std::vector<int> pred{0, 0, 0}, gold{0, 0, 0};
  const auto m = classification_metrics(pred, gold);
  CHECK_FALSE(m.precision.value);
  CHECK_FALSE(m.recall.value);
  CHECK_FALSE(m.balanced_accuracy.value);
  CHECK_FALSE(m.f1.value);
  CHECK_FALSE(m.balanced_accuracy.reason.empty());
  CHECK(*m.specificity.value == 1.0);

  const std::vector<int> miss{0, 0}, pos{1, 1};
  const auto z = classification_metrics(miss, pos);
  CHECK_FALSE(z.precision.value);
  CHECK(*z.recall.value == 0.0);

  CHECK_THROWS_AS(classification_metrics(std::vector<int>{1}, std::vector<int>{1, 0}), ValidationError);
  CHECK_THROWS_AS(classification_metrics(std::vector<int>{}, std::vector<int>{}), ValidationError);
}

TEST_CASE("Fleiss kappa") {
  Eigen::MatrixXi two(2, 2);
  two << 0, 3, 2, 1;
  CHECK(fleiss_kappa(two).kappa == doctest::Approx(0.25));

  Eigen::MatrixXi full(3, 2);
  full << 3, 0, 0, 3, 3, 0;
  CHECK(fleiss_kappa(full).kappa == 1.0);
  Eigen::MatrixXi one_cat(2, 2);
  one_cat << 4, 0, 4, 0;
  CHECK(fleiss_kappa(one_cat).kappa == 1.0);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const int cats = 2 + static_cast<int>(rng() % 3);
    std::vector<std::vector<int>> ratings(8 + rng() % 10, std::vector<int>(3 + rng() % 3));
    for (auto& item : ratings) {
      const int truth = static_cast<int>(rng() % static_cast<unsigned>(cats));
      for (auto& r : item) r = rng() % 4 ? truth : static_cast<int>(rng() % static_cast<unsigned>(cats));
    }
    const auto c = counts_of(ratings, cats);
    if ((c.colwise().sum().array() == c.sum()).any()) continue;
    CHECK(fleiss_kappa(c).kappa == doctest::Approx(fleiss_oracle(ratings, cats)).epsilon(1e-12));
  }

  Eigen::MatrixXi uneven(2, 2);
  uneven << 2, 1, 1, 1;
  CHECK_THROWS_AS(fleiss_kappa(uneven), ValidationError);
  Eigen::MatrixXi single(2, 2);
  single << 1, 0, 0, 1;
  CHECK_THROWS_AS(fleiss_kappa(single), ValidationError);
}

TEST_CASE("Cohen kappa") {
  const std::vector<int> a{1, 1, 1, 0}, b{1, 1, 0, 0};
  CHECK(cohen_kappa(a, b).kappa == doctest::Approx(0.5));
  CHECK(cohen_kappa(a, a).kappa == 1.0);
  CHECK(cohen_kappa(std::vector<int>{1, 1}, std::vector<int>{1, 1}).kappa == 1.0);

  // With two raters Fleiss and Cohen differ only in the chance term; check the
  // symmetric case where marginals agree and the two coincide.
  const std::vector<int> x{1, 0, 1, 0, 1, 1, 0, 0}, y{1, 0, 0, 1, 1, 1, 0, 0};
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(8, 2);
  for (int i = 0; i < 8; ++i) {
    ++c(i, x[static_cast<std::size_t>(i)]);
    ++c(i, y[static_cast<std::size_t>(i)]);
  }
  CHECK(cohen_kappa(x, y).kappa == doctest::Approx(fleiss_kappa(c).kappa));

  CHECK_THROWS_AS(cohen_kappa(a, std::vector<int>{1}), ValidationError);
}

TEST_CASE("token counts and lengths") {
  CHECK(count_tokens("") == 0);
  CHECK(count_tokens("  one\ttwo \n three  ") == 3);
  const std::vector<std::string> texts{"a b", "c d e f"};
  CHECK(length_stats(texts).avg_tokens == 3.0);

  std::vector<RationaleRecord> recs(3);
  recs[0].source_id = "s";
  recs[0].text = "x y";
  recs[1].source_id = "s";
  recs[1].text = "x y z w";
  recs[2].source_id = "t";
  const auto by = length_by_source(recs);
  CHECK(by.at("s").avg_tokens == 3.0);
  CHECK(by.at("s").texts == 2);
  CHECK(by.at("t").missing == 1);
  CHECK(by.at("t").texts == 0);
}
