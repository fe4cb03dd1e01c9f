#include "ratkit/budget.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ratkit {

namespace {

struct InputDraws {
  bool used = false;
  double r_avg = 0.0;
  double r_max = 0.0;
};

double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

BudgetSweepResult random_budget_sweep(const std::vector<EmbeddingGroup>& groups,
                                      const std::vector<std::size_t>& budgets, std::size_t draws,
                                      std::uint64_t seed, std::string_view generator, unsigned threads) {
  if (draws == 0) throw ValidationError("budget sweep: draws must be >= 1");
  if (budgets.empty()) throw ValidationError("budget sweep: empty budget list");
  for (auto b : budgets) {
    if (b == 0) throw ValidationError("budget sweep: budgets must be >= 1");
  }

  BudgetSweepResult out;
  out.draws = draws;
  out.seed = seed;
  for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
    const std::size_t budget = budgets[bi];
    std::vector<InputDraws> per_input(groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t gi) {
      const auto& g = groups[gi];
      const auto sources = g.sources(generator);
      if (sources.size() < budget || g.size() == 0) return;
      InputDraws acc{true, 0.0, 0.0};
      std::vector<std::size_t> pick(sources.size());
      for (std::size_t t = 0; t < draws; ++t) {
        Rng rng(stream_seed(seed, gi, (static_cast<std::uint64_t>(budget) << 32) + t));
        std::iota(pick.begin(), pick.end(), std::size_t{0});
        std::shuffle(pick.begin(), pick.end(), rng);
        std::set<std::string_view> chosen;
        for (std::size_t s = 0; s < budget; ++s) chosen.insert(sources[pick[s]]);
        std::vector<Index> rows;
        for (std::size_t i = 0; i < g.members.size(); ++i) {
          const auto& m = g.members[i];
          if ((generator.empty() || m.generator_id == generator) && chosen.contains(m.source_id)) {
            rows.push_back(static_cast<Index>(i));
          }
        }
        const auto c = coverage(g.embeddings, std::span<const Index>(rows));
        acc.r_avg += c.r_avg;
        acc.r_max += c.r_max;
      }
      acc.r_avg /= static_cast<double>(draws);
      acc.r_max /= static_cast<double>(draws);
      per_input[gi] = acc;
    });

    BudgetCell cell;
    cell.budget = budget;
    std::vector<double> avg, max;
    for (const auto& d : per_input) {
      if (!d.used) {
        ++cell.skipped;
        continue;
      }
      avg.push_back(d.r_avg);
      max.push_back(d.r_max);
    }
    cell.inputs = avg.size();
    if (!avg.empty()) {
      cell.r_avg = std::accumulate(avg.begin(), avg.end(), 0.0) / static_cast<double>(avg.size());
      cell.r_max = std::accumulate(max.begin(), max.end(), 0.0) / static_cast<double>(max.size());
      cell.se_r_avg = standard_error(avg);
      cell.se_r_max = standard_error(max);
    }
    out.cells.push_back(cell);
  }
  return out;
}

}  // namespace ratkit
