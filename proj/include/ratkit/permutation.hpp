#pragma once

#include "ratkit/core.hpp"
#include "ratkit/records.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ratkit {

/// Embeddings with each input block's mean removed. Rows of one block are contiguous.
struct Residuals {
  EmbeddingMatrixd values;
  std::vector<std::string> input_ids;            // per row
  std::vector<int> labels;                       // per row, index into `sources`
  std::vector<std::string> sources;
  std::vector<std::pair<Index, Index>> blocks;   // [begin, end) per retained input
  std::vector<std::string> excluded_inputs;      // blocks with fewer than two members

  Index size() const { return values.rows(); }
};

/// Subtracts the per-input mean embedding. Inputs with one member are excluded and listed.
/// A non-empty `generator` restricts members to that generator.
Residuals residualize(const std::vector<EmbeddingGroup>& groups, std::string_view generator = {});

/// One-way multivariate sums of squares for a labelling of the rows of `values`.
struct AnovaSums {
  double ss_total = 0.0;
  double ss_within = 0.0;
  double ss_between = 0.0;
};

AnovaSums anova_sums(const EmbeddingMatrixd& values, std::span<const int> labels, int groups);

struct PermanovaResult {
  std::size_t n = 0;
  std::size_t k = 0;
  double f_stat = 0.0;  // +inf when within-group scatter vanishes
  double r_squared = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;
  double ss_total = 0.0;
  double ss_within = 0.0;
  double ss_between = 0.0;
};

/// Pseudo-F from sums of squares; +inf when ss_within is negligible but ss_between is not.
double pseudo_f(const AnovaSums& sums, std::size_t n, std::size_t k);

/// PERMANOVA with source labels shuffled independently inside each input block.
/// Replicate r draws from stream (seed, r), so the result does not depend on `threads`.
PermanovaResult permanova(const Residuals& residuals, std::size_t permutations, std::uint64_t seed,
                          unsigned threads = 1);

struct CorrelationResult {
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  double p_value = 1.0;  // two-sided permutation p for Pearson r
  std::size_t n = 0;
  std::size_t permutations = 0;
};

/// Mean ranks (1-based), ties share their average rank.
std::vector<double> average_ranks(std::span<const double> values);
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

/// Pearson and Spearman over pairs where both values are finite. Needs n >= 3 and nonzero
/// variance on both sides.
CorrelationResult correlate(std::span<const double> x, std::span<const double> y, std::size_t permutations,
                            std::uint64_t seed, unsigned threads = 1);

/// Strict upper triangle in row-major order.
std::vector<double> upper_triangle(const MatrixXd& a);

CorrelationResult matrix_uppertri_correlation(const MatrixXd& a, const MatrixXd& b, std::size_t permutations,
                                              std::uint64_t seed, unsigned threads = 1);

}  // namespace ratkit
