#pragma once

// Numerical checks of the coverage bound, the ridge variance/bias bounds and the
// correlated-noise variance identity on synthetic constructions.

#include "ratkit/diversity.hpp"

#include <cstdint>
#include <span>

namespace ratkit {

/// loss(z) = L * |z - center| + offset, exactly L-Lipschitz in z.
struct LipschitzLoss {
  double lipschitz = 1.0;
  VectorXd center;
  double offset = 0.0;

  template <typename Derived>
  double operator()(const Eigen::MatrixBase<Derived>& z) const {
    return lipschitz * (z.transpose() - center).norm() + offset;
  }
};

struct CoverageBoundCheck {
  double lhs = 0.0;     // max loss over the pool
  double rhs = 0.0;     // max loss over the selection + L * r_max
  double radius = 0.0;  // r_max of the selection against the pool
  double slack = 0.0;   // rhs - lhs
  bool holds = false;   // slack >= -1e-9
};

constexpr double kBoundTolerance = 1e-9;

template <typename Derived>
CoverageBoundCheck check_coverage_bound(const Eigen::MatrixBase<Derived>& pool, std::span<const Index> selected,
                                        const LipschitzLoss& loss) {
  if (!(loss.lipschitz > 0.0)) throw ValidationError("Lipschitz constant must be > 0");
  if (loss.center.size() != pool.cols()) throw ValidationError("loss center dimension mismatch");
  CoverageBoundCheck out;
  out.radius = coverage(pool, selected).r_max;
  out.lhs = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < pool.rows(); ++i) out.lhs = std::max(out.lhs, loss(pool.row(i)));
  double fit = -std::numeric_limits<double>::infinity();
  for (Index i : selected) fit = std::max(fit, loss(pool.row(i)));
  out.rhs = fit + loss.lipschitz * out.radius;
  out.slack = out.rhs - out.lhs;
  out.holds = out.slack >= -kBoundTolerance;
  return out;
}

struct CoverageSweep {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;
};

/// Random pools (2..30 points, dimension 1..8), random non-empty subsets and random losses.
CoverageSweep coverage_bound_sweep(std::size_t trials, std::uint64_t seed, unsigned threads = 1);

struct RidgeProblem {
  MatrixXd design;  // m x p
  double lambda = 1.0;
  double sigma = 1.0;
  VectorXd theta_star;
};

struct RidgeCheck {
  double variance_term = 0.0;   // sigma^2 tr(A^-2 H^T H), A = H^T H + lambda I
  double variance_bound = 0.0;  // sigma^2 tr(A^-1)
  double bias_term = 0.0;       // lambda^2 theta*^T A^-2 theta*
  double bias_bound = 0.0;      // lambda^2 |theta*|^2 |A^-1|_2^2
  double mc_mse = 0.0;
  double mc_se = 0.0;
  std::size_t trials = 0;
  bool variance_holds = false;
  bool mse_holds = false;  // mc_mse <= variance_bound + bias_bound + 3 se
  bool holds = false;
};

struct RidgeTerms {
  double variance_term = 0.0;
  double variance_bound = 0.0;
  double bias_term = 0.0;
  double bias_bound = 0.0;
};

RidgeTerms ridge_terms(const RidgeProblem& problem);

/// Analytic terms plus a Monte Carlo estimate of E|theta_hat - theta*|^2 under Gaussian noise.
RidgeCheck check_ridge_bounds(const RidgeProblem& problem, std::size_t trials, std::uint64_t seed,
                              unsigned threads = 1);

struct RidgeSweep {
  std::size_t instances = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // max variance_term / variance_bound
};

RidgeSweep ridge_bound_sweep(std::size_t instances, std::uint64_t seed);

struct CorrelatedNoiseSpec {
  double sigma = 1.0;
  std::size_t m = 1;
  double rho_bar = 0.0;  // in (-1/(m-1), 1]
  double target = 0.0;
};

/// sigma^2 / m * (1 + (m - 1) rho_bar)
double mean_variance(const CorrelatedNoiseSpec& spec);

struct VarianceCheck {
  double analytic_var = 0.0;
  double mc_var = 0.0;
  double rel_diff = 0.0;
  double tolerance = 0.0;  // max(2%, 4 / sqrt(trials))
  std::size_t trials = 0;
  bool holds = false;
};

/// Sample variance of the mean of m equicorrelated Gaussians against the closed form.
VarianceCheck check_variance_reduction(const CorrelatedNoiseSpec& spec, std::size_t trials, std::uint64_t seed,
                                       unsigned threads = 1);

}  // namespace ratkit
