#include "ratkit/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ratkit {

namespace {

// Monte Carlo trials are split into fixed chunks; chunk c draws from stream (seed, c) and the
// partial sums are combined in chunk order, so results do not depend on the thread count.
constexpr std::size_t kChunk = 4096;

struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * n * o.n / total;
    n = total;
  }
  double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
};

template <typename Body>
Moments chunked_moments(std::size_t trials, std::uint64_t seed, unsigned threads, Body&& body) {
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<Moments> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    Rng rng = make_stream(seed, c);
    const std::size_t count = std::min(kChunk, trials - c * kChunk);
    for (std::size_t t = 0; t < count; ++t) parts[c].add(body(rng));
  });
  Moments total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace

CoverageSweep coverage_bound_sweep(std::size_t trials, std::uint64_t seed, unsigned threads) {
  std::vector<double> slack(trials, 0.0);
  parallel_for(trials, threads, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    std::uniform_int_distribution<Index> size(2, 30), dim(1, 8);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Index n = size(rng), d = dim(rng);
    const double scale = std::exp(4.0 * unit(rng) - 2.0);
    EmbeddingMatrixd pool(n, d);
    for (Index i = 0; i < pool.size(); ++i) pool.data()[i] = scale * normal(rng);

    std::vector<Index> subset;
    for (Index i = 0; i < n; ++i) {
      if (unit(rng) < 0.3) subset.push_back(i);
    }
    if (subset.empty()) subset.push_back(std::uniform_int_distribution<Index>(0, n - 1)(rng));

    LipschitzLoss loss;
    loss.lipschitz = std::exp(6.0 * unit(rng) - 3.0);
    loss.center = VectorXd(d);
    for (Index i = 0; i < d; ++i) loss.center[i] = 2.0 * scale * normal(rng);
    loss.offset = normal(rng);
    slack[t] = check_coverage_bound(pool, subset, loss).slack;
  });
  CoverageSweep out;
  out.trials = trials;
  out.min_slack = slack.empty() ? 0.0 : *std::min_element(slack.begin(), slack.end());
  out.violations = static_cast<std::size_t>(
      std::count_if(slack.begin(), slack.end(), [](double s) { return s < -kBoundTolerance; }));
  return out;
}

RidgeTerms ridge_terms(const RidgeProblem& problem) {
  const MatrixXd& h = problem.design;
  const Index p = h.cols();
  if (!(problem.lambda > 0.0)) throw ValidationError("ridge: lambda must be > 0");
  if (!(problem.sigma > 0.0)) throw ValidationError("ridge: sigma must be > 0");
  if (problem.theta_star.size() != p) throw ValidationError("ridge: theta* dimension mismatch");

  const MatrixXd gram = h.transpose() * h;
  const MatrixXd a = gram + problem.lambda * MatrixXd::Identity(p, p);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw DegenerateDataError("ridge: regularized Gram matrix is not positive definite");
  }
  const MatrixXd& v = eig.eigenvectors();
  const VectorXd inv = eig.eigenvalues().cwiseInverse();
  const MatrixXd a_inv = v * inv.asDiagonal() * v.transpose();
  const MatrixXd a_inv2 = v * inv.cwiseAbs2().asDiagonal() * v.transpose();
  const double s2 = problem.sigma * problem.sigma;
  const double l2 = problem.lambda * problem.lambda;

  RidgeTerms t;
  t.variance_term = s2 * (a_inv2 * gram).trace();
  t.variance_bound = s2 * a_inv.trace();
  t.bias_term = l2 * problem.theta_star.dot(a_inv2 * problem.theta_star);
  t.bias_bound = l2 * problem.theta_star.squaredNorm() * inv.maxCoeff() * inv.maxCoeff();
  return t;
}

RidgeCheck check_ridge_bounds(const RidgeProblem& problem, std::size_t trials, std::uint64_t seed,
                              unsigned threads) {
  if (trials < 1) throw ValidationError("ridge: trials must be >= 1");
  const RidgeTerms terms = ridge_terms(problem);
  const MatrixXd& h = problem.design;
  const Index p = h.cols();
  const Eigen::LDLT<MatrixXd> solver(h.transpose() * h + problem.lambda * MatrixXd::Identity(p, p));
  const VectorXd clean = h * problem.theta_star;

  const Moments mse = chunked_moments(trials, seed, threads, [&](Rng& rng) {
    std::normal_distribution<double> normal;
    VectorXd y = clean;
    for (Index i = 0; i < y.size(); ++i) y[i] += problem.sigma * normal(rng);
    const VectorXd theta = solver.solve(h.transpose() * y);
    return (theta - problem.theta_star).squaredNorm();
  });

  RidgeCheck out;
  out.variance_term = terms.variance_term;
  out.variance_bound = terms.variance_bound;
  out.bias_term = terms.bias_term;
  out.bias_bound = terms.bias_bound;
  out.trials = trials;
  out.mc_mse = mse.mean;
  out.mc_se = std::sqrt(mse.variance() / mse.n);
  out.variance_holds = terms.variance_term <= terms.variance_bound * (1.0 + 1e-12);
  out.mse_holds = out.mc_mse <= terms.variance_bound + terms.bias_bound + 3.0 * out.mc_se;
  out.holds = out.variance_holds && out.mse_holds;
  return out;
}

RidgeSweep ridge_bound_sweep(std::size_t instances, std::uint64_t seed) {
  RidgeSweep out;
  out.instances = instances;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng = make_stream(seed, i);
    std::uniform_int_distribution<Index> rows(1, 12), cols(1, 8);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RidgeProblem prob;
    prob.design = MatrixXd(rows(rng), cols(rng));
    const double scale = std::exp(4.0 * unit(rng) - 2.0);
    for (Index k = 0; k < prob.design.size(); ++k) prob.design.data()[k] = scale * normal(rng);
    if (unit(rng) < 0.25 && prob.design.rows() > 1) prob.design.row(1) = prob.design.row(0);  // rank deficiency
    prob.lambda = std::exp(8.0 * unit(rng) - 4.0);
    prob.sigma = std::exp(2.0 * unit(rng) - 1.0);
    prob.theta_star = VectorXd::Zero(prob.design.cols());
    const RidgeTerms t = ridge_terms(prob);
    out.max_ratio = std::max(out.max_ratio, t.variance_term / t.variance_bound);
    if (t.variance_term > t.variance_bound * (1.0 + 1e-12)) ++out.violations;
  }
  return out;
}

double mean_variance(const CorrelatedNoiseSpec& spec) {
  const auto m = static_cast<double>(spec.m);
  return spec.sigma * spec.sigma / m * (1.0 + (m - 1.0) * spec.rho_bar);
}

VarianceCheck check_variance_reduction(const CorrelatedNoiseSpec& spec, std::size_t trials, std::uint64_t seed,
                                       unsigned threads) {
  if (spec.m < 1) throw ValidationError("variance check: m must be >= 1");
  if (!(spec.sigma > 0.0)) throw ValidationError("variance check: sigma must be > 0");
  if (spec.m > 1 && !(spec.rho_bar > -1.0 / static_cast<double>(spec.m - 1) && spec.rho_bar <= 1.0)) {
    throw ValidationError("variance check: rho_bar outside (-1/(m-1), 1]");
  }
  if (trials < 10000) throw ValidationError("variance check: needs at least 10^4 trials");

  const auto m = static_cast<Index>(spec.m);
  const double rho = spec.m > 1 ? spec.rho_bar : 0.0;
  // Negative correlation: factor the equicorrelation matrix as V sqrt(Lambda).
  MatrixXd factor;
  if (rho < 0.0) {
    MatrixXd corr = MatrixXd::Constant(m, m, rho);
    corr.diagonal().setOnes();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(corr);
    factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  const double shared = std::sqrt(std::max(rho, 0.0));
  const double own = std::sqrt(1.0 - std::max(rho, 0.0));

  const Moments mean_of = chunked_moments(trials, seed, threads, [&](Rng& rng) {
    std::normal_distribution<double> normal;
    double sum = 0.0;
    if (rho >= 0.0) {
      const double g0 = normal(rng);
      for (Index i = 0; i < m; ++i) sum += shared * g0 + own * normal(rng);
    } else {
      VectorXd g(m);
      for (Index i = 0; i < m; ++i) g[i] = normal(rng);
      sum = (factor * g).sum();
    }
    return spec.target + spec.sigma * sum / static_cast<double>(m);
  });

  VarianceCheck out;
  out.trials = trials;
  out.analytic_var = mean_variance(spec);
  out.mc_var = mean_of.variance();
  out.tolerance = std::max(0.02, 4.0 / std::sqrt(static_cast<double>(trials)));
  out.rel_diff = std::abs(out.mc_var - out.analytic_var) / out.analytic_var;
  out.holds = out.rel_diff <= out.tolerance;
  return out;
}

}  // namespace ratkit
