#pragma once

// Per-input rationale diversity proxies: coverage radii, covariance spectrum summaries and
// pairwise redundancy. Every kernel takes an embedding block with one row per rationale.

#include "ratkit/core.hpp"
#include "ratkit/records.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ratkit {

template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct CoverageResult {
  Scalar r_avg = 0;
  Scalar r_max = 0;
};

/// Nearest-selected Euclidean distance of every pool row: mean (r_avg) and max (r_max).
template <typename PoolDerived, typename SelDerived>
CoverageResult<typename PoolDerived::Scalar> coverage(const Eigen::MatrixBase<PoolDerived>& pool,
                                                      const Eigen::MatrixBase<SelDerived>& selected) {
  using Scalar = typename PoolDerived::Scalar;
  if (selected.rows() == 0) throw ValidationError("coverage: empty selection");
  if (pool.rows() == 0) throw ValidationError("coverage: empty pool");
  if (pool.cols() != selected.cols()) throw ValidationError("coverage: dimension mismatch");

  ColVector<Scalar> nearest = ColVector<Scalar>::Constant(pool.rows(), std::numeric_limits<Scalar>::infinity());
  for (Index j = 0; j < selected.rows(); ++j) {
    nearest = nearest.cwiseMin((pool.rowwise() - selected.row(j)).rowwise().squaredNorm());
  }
  nearest = nearest.cwiseSqrt();
  return {nearest.mean(), nearest.maxCoeff()};
}

template <typename PoolDerived>
CoverageResult<typename PoolDerived::Scalar> coverage(const Eigen::MatrixBase<PoolDerived>& pool,
                                                      std::span<const Index> selected) {
  if (selected.empty()) throw ValidationError("coverage: empty selection");
  for (Index i : selected) {
    if (i < 0 || i >= pool.rows()) throw ValidationError("coverage: selected index out of range");
  }
  const std::vector<Index> rows(selected.begin(), selected.end());
  return coverage(pool, pool(rows, Eigen::all));
}

enum class CovariancePath { Auto, Gram, Direct };

template <typename Scalar>
struct CovarianceSpectrum {
  ColVector<Scalar> eigenvalues;  // leading min(m, d) eigenvalues of the 1/m covariance, descending
  Scalar trace = 0;
  CovariancePath path = CovariancePath::Auto;
};

/// Spectrum of (1/m) sum (z_i - mean)(z_i - mean)^T. With m < d the nonzero spectrum comes
/// from the m x m centered Gram matrix; otherwise from the d x d covariance itself.
template <typename Derived>
CovarianceSpectrum<typename Derived::Scalar> covariance_spectrum(const Eigen::MatrixBase<Derived>& points,
                                                                 CovariancePath path = CovariancePath::Auto) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index m = points.rows();
  const Index d = points.cols();
  if (m < 1) throw ValidationError("covariance: empty group");

  const Matrix centered = points.rowwise() - points.colwise().mean();
  CovarianceSpectrum<Scalar> out;
  out.trace = centered.squaredNorm() / static_cast<Scalar>(m);
  if (path == CovariancePath::Auto) path = m < d ? CovariancePath::Gram : CovariancePath::Direct;
  out.path = path;

  const Matrix second = path == CovariancePath::Gram
                            ? Matrix(centered * centered.transpose() / static_cast<Scalar>(m))
                            : Matrix(centered.transpose() * centered / static_cast<Scalar>(m));
  Eigen::SelfAdjointEigenSolver<Matrix> solver(second, Eigen::EigenvaluesOnly);
  // Ascending from the solver; keep the top min(m, d), descending, clamped at zero.
  const ColVector<Scalar> ascending = solver.eigenvalues();
  const Index keep = std::min(m, d);
  out.eigenvalues = ascending.reverse().head(keep).cwiseMax(Scalar(0));
  return out;
}

template <typename Scalar>
struct SpectralResult {
  Scalar erank = 0;
  Scalar logdet = 0;
  Scalar pr = 0;
  Scalar anisotropy = 0;
  ColVector<Scalar> eigenvalues;
  bool degenerate = false;  // fewer than two members or zero spread; all fields zero
};

constexpr double kEigenClampRatio = 1e-12;

/// erank = tr/lambda_max, PR = tr^2/tr(S^2), anisotropy = lambda_max/tr, logdet = sum log(1 + alpha lambda).
template <typename Scalar>
SpectralResult<Scalar> spectral_from_eigenvalues(ColVector<Scalar> eigenvalues, Scalar alpha) {
  if (!(alpha > 0)) throw ValidationError("spectral: alpha must be > 0");
  SpectralResult<Scalar> out;
  const Scalar top = eigenvalues.size() ? eigenvalues.maxCoeff() : Scalar(0);
  if (!(top > 0)) {
    out.eigenvalues = ColVector<Scalar>::Zero(eigenvalues.size());
    out.degenerate = true;
    return out;
  }
  eigenvalues = (eigenvalues.array() < Scalar(kEigenClampRatio) * top).select(Scalar(0), eigenvalues);
  const Scalar trace = eigenvalues.sum();
  out.erank = trace / top;
  out.pr = trace * trace / eigenvalues.squaredNorm();
  out.anisotropy = top / trace;
  out.logdet = (Scalar(1) + alpha * eigenvalues.array()).log().sum();
  out.eigenvalues = std::move(eigenvalues);
  return out;
}

template <typename Derived>
SpectralResult<typename Derived::Scalar> spectral(const Eigen::MatrixBase<Derived>& points,
                                                  typename Derived::Scalar alpha,
                                                  CovariancePath path = CovariancePath::Auto) {
  using Scalar = typename Derived::Scalar;
  if (!(alpha > 0)) throw ValidationError("spectral: alpha must be > 0");
  if (points.rows() < 2) {
    SpectralResult<Scalar> out;
    out.eigenvalues = ColVector<Scalar>::Zero(std::min<Index>(points.rows(), points.cols()));
    out.degenerate = true;
    return out;
  }
  return spectral_from_eigenvalues<Scalar>(covariance_spectrum(points, path).eigenvalues, alpha);
}

template <typename Scalar>
struct RedundancyResult {
  Scalar d_pair = 0;         // mean squared pairwise distance
  Scalar sim_avg = 0;        // mean pairwise cosine
  Scalar near_dup_rate = 0;  // fraction of pairs with cosine >= tau
};

/// Unit-normalized rows. Throws naming the first zero-norm row.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> normalized_rows(
    const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const ColVector<Scalar> norms = points.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i) {
    if (!(norms[i] > 0)) throw ValidationError("zero-norm embedding at row " + std::to_string(i));
  }
  return norms.cwiseInverse().asDiagonal() * points;
}

template <typename Derived>
RedundancyResult<typename Derived::Scalar> redundancy(const Eigen::MatrixBase<Derived>& points,
                                                      typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index m = points.rows();
  if (m < 2) throw ValidationError("redundancy: needs at least two members");
  if (!(tau > 0 && tau <= 1)) throw ValidationError("redundancy: tau must lie in (0, 1]");

  const Matrix unit = normalized_rows(points);
  const Matrix centered = points.rowwise() - points.colwise().mean();
  const Scalar pairs = static_cast<Scalar>(m) * static_cast<Scalar>(m - 1) / 2;

  RedundancyResult<Scalar> out;
  // sum_{i<j} |z_i - z_j|^2 = m * sum_i |z_i - mean|^2
  out.d_pair = static_cast<Scalar>(m) * centered.squaredNorm() / pairs;

  const Matrix cosine = unit * unit.transpose();
  Scalar sum = 0;
  Index dup = 0;
  for (Index j = 1; j < m; ++j) {
    for (Index i = 0; i < j; ++i) {
      const Scalar c = std::clamp(cosine(i, j), Scalar(-1), Scalar(1));
      sum += c;
      dup += c >= tau ? 1 : 0;
    }
  }
  out.sim_avg = sum / pairs;
  out.near_dup_rate = static_cast<Scalar>(dup) / pairs;
  return out;
}

template <typename A, typename B>
typename A::Scalar cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > 0) || !(nb > 0)) throw ValidationError("cosine with a zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), Scalar(-1), Scalar(1));
}

// ---------------------------------------------------------------------------
// Group-level helpers (double precision, record-aware error messages).

/// Zero-norm check naming the offending record.
void require_nonzero_norms(const EmbeddingGroup& group);

/// Row-normalizes every group in place.
void normalize_groups(std::vector<EmbeddingGroup>& groups);

struct SourcePairMatrices {
  std::vector<std::string> sources;  // row/column order
  MatrixXd cosine_mean;              // C; NaN where no common input
  MatrixXd distance;                 // D = 1 - C
  MatrixXd near_dup;                 // N^(tau)
  Eigen::MatrixXi common_inputs;     // |D_kl|

  bool missing(Index k, Index l) const { return common_inputs(k, l) == 0; }
};

/// Source-pair cosine structure over inputs where both sources appear. With several
/// rationales per source on one input, that input contributes the mean over its cross pairs.
SourcePairMatrices source_pair_matrices(const std::vector<EmbeddingGroup>& groups, double tau,
                                        std::string_view generator = {});

/// All per-input proxies for one (selection, pool) pair.
struct ProxyRow {
  std::string input_id;
  Index members = 0;
  std::optional<double> r_avg, r_max;
  std::optional<double> erank, logdet, pr, anisotropy;
  std::optional<double> d_pair, sim_avg, near_dup_rate;
  bool spectral_degenerate = false;
};

/// Computes every proxy of `selection` with coverage measured against `pool`.
ProxyRow proxy_row(const EmbeddingGroup& selection, const EmbeddingGroup& pool, double alpha, double tau);

}  // namespace ratkit
