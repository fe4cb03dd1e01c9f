#include "ratkit/permutation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace ratkit {

namespace {

// Permuted statistics within this relative distance of the observed one count as ties.
constexpr double kTieTolerance = 1e-10;

bool at_least(double candidate, double observed) {
  if (std::isinf(observed)) return std::isinf(candidate);
  return candidate >= observed - kTieTolerance * std::abs(observed);
}

}  // namespace

Residuals residualize(const std::vector<EmbeddingGroup>& groups, std::string_view generator) {
  Residuals out;
  std::map<std::string, int> slot;
  for (const auto& g : groups) {
    for (const auto& s : g.sources(generator)) slot.emplace(s, 0);
  }
  for (auto& [name, idx] : slot) {
    idx = static_cast<int>(out.sources.size());
    out.sources.push_back(name);
  }

  std::vector<const EmbeddingGroup*> kept;
  std::vector<EmbeddingGroup> filtered;
  filtered.reserve(groups.size());
  Index rows = 0;
  Index dim = -1;
  for (const auto& g : groups) {
    filtered.push_back(generator.empty() ? g : g.filter([&](const GroupMember& m) { return m.generator_id == generator; }));
    const auto& f = filtered.back();
    if (f.size() == 0) continue;
    if (f.size() < 2) {
      out.excluded_inputs.push_back(f.input_id);
      continue;
    }
    if (dim >= 0 && f.dim() != dim) throw ValidationError("residualize: mixed embedding dimensions");
    dim = f.dim();
    rows += f.size();
  }
  out.values.resize(rows, std::max<Index>(dim, 0));
  Index at = 0;
  for (const auto& f : filtered) {
    if (f.size() < 2) continue;
    const Index begin = at;
    out.values.middleRows(at, f.size()) = f.embeddings.rowwise() - f.embeddings.colwise().mean();
    for (const auto& m : f.members) {
      out.input_ids.push_back(f.input_id);
      out.labels.push_back(slot.at(m.source_id));
    }
    at += f.size();
    out.blocks.emplace_back(begin, at);
  }
  return out;
}

AnovaSums anova_sums(const EmbeddingMatrixd& values, std::span<const int> labels, int groups) {
  const Index n = values.rows();
  MatrixXd sums = MatrixXd::Zero(groups, values.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(groups);
  for (Index i = 0; i < n; ++i) {
    sums.row(labels[static_cast<std::size_t>(i)]) += values.row(i);
    counts[labels[static_cast<std::size_t>(i)]] += 1.0;
  }
  const Eigen::RowVectorXd grand = values.colwise().mean();
  MatrixXd means = sums;
  for (int g = 0; g < groups; ++g) {
    if (counts[g] > 0) means.row(g) /= counts[g];
  }
  AnovaSums s;
  s.ss_total = (values.rowwise() - grand).squaredNorm();
  for (Index i = 0; i < n; ++i) {
    s.ss_within += (values.row(i) - means.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  s.ss_between = std::max(0.0, s.ss_total - s.ss_within);
  return s;
}

double pseudo_f(const AnovaSums& sums, std::size_t n, std::size_t k) {
  if (sums.ss_within <= 1e-12 * sums.ss_total) return std::numeric_limits<double>::infinity();
  return (sums.ss_between / static_cast<double>(k - 1)) / (sums.ss_within / static_cast<double>(n - k));
}

PermanovaResult permanova(const Residuals& residuals, std::size_t permutations, std::uint64_t seed,
                          unsigned threads) {
  const auto n = static_cast<std::size_t>(residuals.size());
  const auto k = residuals.sources.size();
  if (k < 2) throw ValidationError("permanova: needs at least two sources");
  std::vector<std::size_t> per_source(k, 0);
  for (int l : residuals.labels) ++per_source[static_cast<std::size_t>(l)];
  for (std::size_t s = 0; s < k; ++s) {
    if (per_source[s] < 2) {
      throw ValidationError("permanova: source '" + residuals.sources[s] + "' has fewer than two observations");
    }
  }
  if (n <= k) throw ValidationError("permanova: needs more observations than sources");

  const int groups = static_cast<int>(k);
  const AnovaSums observed = anova_sums(residuals.values, residuals.labels, groups);
  if (!(observed.ss_total > 0.0)) throw DegenerateDataError("permanova: total sum of squares is zero");

  PermanovaResult out;
  out.n = n;
  out.k = k;
  out.ss_total = observed.ss_total;
  out.ss_within = observed.ss_within;
  out.ss_between = observed.ss_between;
  out.r_squared = observed.ss_between / observed.ss_total;
  out.f_stat = pseudo_f(observed, n, k);
  out.permutations = permutations;

  std::vector<char> exceeds(permutations, 0);
  if (!std::isinf(out.f_stat)) {
    parallel_for(permutations, threads, [&](std::size_t r) {
      std::vector<int> labels = residuals.labels;
      Rng rng = make_stream(seed, r);
      for (const auto& [begin, end] : residuals.blocks) {
        std::shuffle(labels.begin() + begin, labels.begin() + end, rng);
      }
      const double f = pseudo_f(anova_sums(residuals.values, labels, groups), n, k);
      exceeds[r] = at_least(f, out.f_stat) ? 1 : 0;
    });
  }
  const auto count = static_cast<std::size_t>(std::count(exceeds.begin(), exceeds.end(), char{1}));
  out.p_value = static_cast<double>(1 + count) / static_cast<double>(1 + permutations);
  return out;
}

// ---------------------------------------------------------------------------
// Correlation

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("correlation: length mismatch");
  const auto n = static_cast<Index>(x.size());
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n), yv(y.data(), n);
  const Eigen::VectorXd xc = xv.array() - xv.mean();
  const Eigen::VectorXd yc = yv.array() - yv.mean();
  const double sx = xc.norm(), sy = yc.norm();
  if (!(sx > 0.0) || !(sy > 0.0)) throw ValidationError("correlation undefined: zero variance");
  return std::clamp(xc.dot(yc) / (sx * sy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

CorrelationResult correlate(std::span<const double> x, std::span<const double> y, std::size_t permutations,
                            std::uint64_t seed, unsigned threads) {
  if (x.size() != y.size()) throw ValidationError("correlation: length mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(x[i]) && std::isfinite(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  if (xs.size() < 3) throw ValidationError("correlation: needs at least three finite pairs");

  CorrelationResult out;
  out.n = xs.size();
  out.pearson_r = pearson(xs, ys);
  out.spearman_rho = spearman(xs, ys);
  out.permutations = permutations;

  const double observed = std::abs(out.pearson_r);
  std::vector<char> exceeds(permutations, 0);
  parallel_for(permutations, threads, [&](std::size_t r) {
    std::vector<double> shuffled = ys;
    Rng rng = make_stream(seed, r);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    exceeds[r] = at_least(std::abs(pearson(xs, shuffled)), observed) ? 1 : 0;
  });
  const auto count = static_cast<std::size_t>(std::count(exceeds.begin(), exceeds.end(), char{1}));
  out.p_value = static_cast<double>(1 + count) / static_cast<double>(1 + permutations);
  return out;
}

std::vector<double> upper_triangle(const MatrixXd& a) {
  std::vector<double> out;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = i + 1; j < a.cols(); ++j) out.push_back(a(i, j));
  }
  return out;
}

CorrelationResult matrix_uppertri_correlation(const MatrixXd& a, const MatrixXd& b, std::size_t permutations,
                                              std::uint64_t seed, unsigned threads) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw ValidationError("matrix correlation: shape mismatch");
  }
  if (a.rows() < 3) throw ValidationError("matrix correlation: needs K >= 3");
  const auto ua = upper_triangle(a);
  const auto ub = upper_triangle(b);
  return correlate(ua, ub, permutations, seed, threads);
}

}  // namespace ratkit
