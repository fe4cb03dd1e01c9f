#pragma once

#include "ratkit/diversity.hpp"
#include "ratkit/records.hpp"

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace ratkit {

struct BudgetCell {
  std::size_t budget = 0;
  double r_avg = 0.0;     // mean over inputs of the per-input draw average
  double r_max = 0.0;
  double se_r_avg = 0.0;  // standard error of that mean across inputs
  double se_r_max = 0.0;
  std::size_t inputs = 0;
  std::size_t skipped = 0;  // inputs with fewer than `budget` sources
};

struct BudgetSweepResult {
  std::vector<BudgetCell> cells;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
};

/// Random source-selection baseline. Per input and draw, `budget` sources are drawn
/// uniformly without replacement (from `generator`'s sources when given) and all their
/// rationales are selected; coverage is measured against every rationale of that input.
/// Draw (input i, budget b, draw t) uses stream (seed, i, b * 2^32 + t).
BudgetSweepResult random_budget_sweep(const std::vector<EmbeddingGroup>& groups,
                                      const std::vector<std::size_t>& budgets, std::size_t draws,
                                      std::uint64_t seed, std::string_view generator = {}, unsigned threads = 1);

struct GreedySelection {
  std::vector<Index> selected;  // pick order
  CoverageResult<double> coverage;
};

/// Farthest-point traversal over the rows of `pool`. The first pick is the row nearest the
/// centroid; each later pick is the row farthest from the current selection. Ties go to the
/// earliest row in a seeded shuffle of the indices.
template <typename Derived>
GreedySelection greedy_select(const Eigen::MatrixBase<Derived>& pool, std::size_t budget, std::uint64_t seed) {
  const Index n = pool.rows();
  if (n == 0) throw ValidationError("greedy_select: empty pool");
  if (budget < 1 || budget > static_cast<std::size_t>(n)) {
    throw ValidationError("greedy_select: budget must lie in [1, pool size]");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_stream(seed, 0);
  std::shuffle(order.begin(), order.end(), rng);

  auto argbest = [&](const Eigen::VectorXd& score, bool largest) {
    Index best = order.front();
    for (Index i : order) {
      if (largest ? score[i] > score[best] : score[i] < score[best]) best = i;
    }
    return best;
  };

  GreedySelection out;
  const Eigen::VectorXd to_centroid = (pool.rowwise() - pool.colwise().mean()).rowwise().squaredNorm();
  out.selected.push_back(argbest(to_centroid, false));
  Eigen::VectorXd nearest = (pool.rowwise() - pool.row(out.selected.back())).rowwise().squaredNorm();
  while (out.selected.size() < budget) {
    out.selected.push_back(argbest(nearest, true));
    nearest = nearest.cwiseMin((pool.rowwise() - pool.row(out.selected.back())).rowwise().squaredNorm());
  }
  out.coverage = coverage(pool, std::span<const Index>(out.selected));
  return out;
}

}  // namespace ratkit
