// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances are pinned here and printed with every line.

#include "ratkit/budget.hpp"
#include "ratkit/diversity.hpp"
#include "ratkit/faithfulness.hpp"
#include "ratkit/labels.hpp"
#include "ratkit/metrics.hpp"
#include "ratkit/permutation.hpp"
#include "ratkit/pipeline.hpp"
#include "ratkit/theory.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace ratkit;

namespace {

const fs::path kFixtures = RATKIT_FIXTURE_DIR;
const fs::path kTmp = fs::path(RATKIT_TEST_TMP) / "acceptance";

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fs", secs);
  std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << " (" << buf << ")"
            << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double x) { return format_real(x); }

EmbeddingMatrixd gaussian(Index m, Index d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal;
  EmbeddingMatrixd x(m, d);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = scale * normal(rng);
  return x;
}

oracle::Mat to_rows(const EmbeddingMatrixd& x) {
  oracle::Mat out;
  for (Index i = 0; i < x.rows(); ++i) {
    oracle::Vec r;
    for (Index k = 0; k < x.cols(); ++k) r.push_back(x(i, k));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EmbeddingGroup> source_groups(std::size_t inputs, std::size_t sources, Index d, double effect,
                                          std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<EmbeddingGroup> out;
  for (std::size_t in = 0; in < inputs; ++in) {
    EmbeddingGroup g{"in" + std::to_string(in), "b", {}, gaussian(static_cast<Index>(sources), d, rng)};
    const double shift = 3.0 * normal(rng);
    for (std::size_t s = 0; s < sources; ++s) {
      g.members.push_back({"s" + std::to_string(s), "g", in * sources + s});
      g.embeddings.row(static_cast<Index>(s)).array() += shift;
      g.embeddings(static_cast<Index>(s), 0) += effect * static_cast<double>(s);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome proxy_oracle() {
  constexpr double tol = 1e-9;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::size_t mismatches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const Index m = 2 + static_cast<Index>(rng() % 7);
    const Index d = 1 + static_cast<Index>(rng() % 32);
    const auto x = gaussian(m, d, rng, 0.2 + static_cast<double>(rng() % 50) / 10.0);
    const double alpha = 0.5 + static_cast<double>(rng() % 20) / 10.0;
    const double tau = 0.5 + static_cast<double>(rng() % 50) / 100.0;
    std::vector<std::size_t> pick;
    std::vector<Index> sel;
    for (Index i = 0; i < m; ++i) {
      if (rng() % 2 || (i == m - 1 && sel.empty())) {
        sel.push_back(i);
        pick.push_back(static_cast<std::size_t>(i));
      }
    }
    const auto rows = to_rows(x);
    const auto cov = coverage(x, std::span<const Index>(sel));
    const auto ocov = oracle::coverage(rows, oracle::rows_of(rows, pick));
    const auto sp = spectral(x, alpha);
    const auto osp = oracle::spectral(rows, alpha);
    const auto red = redundancy(x, tau);
    const auto ored = oracle::redundancy(rows, tau);
    for (double diff : {oracle::rel_diff(cov.r_avg, ocov.r_avg), oracle::rel_diff(cov.r_max, ocov.r_max),
                        oracle::rel_diff(sp.erank, osp.erank), oracle::rel_diff(sp.logdet, osp.logdet),
                        oracle::rel_diff(sp.pr, osp.pr), oracle::rel_diff(sp.anisotropy, osp.anisotropy),
                        oracle::rel_diff(red.d_pair, ored.d_pair), oracle::rel_diff(red.sim_avg, ored.sim_avg),
                        oracle::rel_diff(red.near_dup_rate, ored.near_dup_rate)}) {
      worst = std::max(worst, diff);
      mismatches += diff > tol;
    }
  }
  return {mismatches == 0, "200 instances x 9 proxies, max rel diff " + num(worst) + " (tol 1e-9)"};
}

Outcome coverage_monotone() {
  std::mt19937_64 rng(202);
  std::size_t violations = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Index n = 3 + static_cast<Index>(rng() % 30);
    const auto pool = gaussian(n, 1 + static_cast<Index>(rng() % 16), rng);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto small = 1 + rng() % static_cast<std::size_t>(n - 1);
    const auto big = small + rng() % (static_cast<std::size_t>(n) - small + 1);
    const std::vector<Index> s(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(small));
    const std::vector<Index> t(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(big));
    const auto a = coverage(pool, std::span<const Index>(s));
    const auto b = coverage(pool, std::span<const Index>(t));
    violations += (b.r_avg > a.r_avg) + (b.r_max > a.r_max);
  }
  return {violations == 0, "1000 nested pairs, " + std::to_string(violations) + " violations"};
}

Outcome eigen_paths() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Index m = 2 + static_cast<Index>(rng() % 7);
    const Index d = m + 1 + static_cast<Index>(rng() % 24);
    const auto x = gaussian(m, d, rng, 1.0 + static_cast<double>(rep % 5));
    const auto g = covariance_spectrum(x, CovariancePath::Gram);
    const auto dd = covariance_spectrum(x, CovariancePath::Direct);
    const double top = dd.eigenvalues[0];
    for (Index i = 0; i < g.eigenvalues.size(); ++i) {
      worst = std::max(worst, std::abs(g.eigenvalues[i] - dd.eigenvalues[i]) / top);
    }
    worst = std::max(worst, oracle::rel_diff(g.trace, dd.trace));
  }
  return {worst <= 1e-9, "100 groups, max |diff| / lambda_max " + num(worst) + " (tol 1e-9)"};
}

// Exact upper tail of Binomial(n, p): smallest k with P(X <= k) >= q.
std::size_t binom_quantile(std::size_t n, double p, double q) {
  double cdf = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double lp = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                      (k ? k * std::log(p) : 0.0) + (n - k ? (n - k) * std::log1p(-p) : 0.0);
    cdf += p <= 0.0 ? (k == 0) : p >= 1.0 ? (k == n) : std::exp(lp);
    if (cdf >= q) return k;
  }
  return n;
}

double enumerated_p(const Residuals& res) {
  const auto rows = to_rows(res.values);
  const int k = static_cast<int>(res.sources.size());
  const double observed = oracle::pseudo_f(rows, res.labels, k);
  std::vector<int> labels = res.labels;
  for (const auto& [b, e] : res.blocks) std::sort(labels.begin() + b, labels.begin() + e);
  std::size_t total = 0, hits = 0;
  std::function<void(std::size_t)> walk = [&](std::size_t blk) {
    if (blk == res.blocks.size()) {
      ++total;
      hits += oracle::pseudo_f(rows, labels, k) >= observed * (1.0 - 1e-10);
      return;
    }
    const auto [b, e] = res.blocks[blk];
    do walk(blk + 1);
    while (std::next_permutation(labels.begin() + b, labels.begin() + e));
  };
  walk(0);
  return static_cast<double>(hits) / static_cast<double>(total);
}

Outcome permanova_calibration() {
  std::mt19937_64 rng(404);
  std::ostringstream detail;
  bool ok = true;

  // (a) strongest possible effect: every relabeling but the identity is beaten.
  const auto strong = residualize(source_groups(12, 3, 4, 50.0, rng));
  const double pmin = permanova(strong, 199, 1).p_value;
  ok &= pmin == 0.005;
  detail << "min p " << num(pmin) << " (want 0.005)";

  // (b) sampled against enumerated p on fixtures with <= 1024 relabelings.
  struct Shape {
    std::size_t inputs, sources;
  };
  std::size_t inside = 0, cases = 0;
  for (const Shape s : {Shape{3, 3}, Shape{4, 2}, Shape{10, 2}, Shape{5, 2}, Shape{2, 4}, Shape{3, 3}}) {
    const auto res = residualize(source_groups(s.inputs, s.sources, 3, 0.4, rng));
    const double exact = enumerated_p(res);
    const std::size_t perms = 199;
    const auto r = permanova(res, perms, 500 + cases);
    const auto count = static_cast<std::size_t>(std::llround(r.p_value * (perms + 1.0))) - 1;
    const auto lo = binom_quantile(perms, exact, 0.005), hi = binom_quantile(perms, exact, 0.995);
    inside += count >= lo && count <= hi;
    ++cases;
  }
  ok &= inside == cases;
  detail << "; " << inside << "/" << cases << " sampled p inside 99% binomial interval";

  // (c) KS uniformity of null p-values.
  std::vector<double> ps;
  for (int rep = 0; rep < 500; ++rep) {
    const auto res = residualize(source_groups(6, 3, 3, 0.0, rng));
    ps.push_back(permanova(res, 199, 1000 + static_cast<std::uint64_t>(rep)).p_value);
  }
  std::sort(ps.begin(), ps.end());
  double ks = 0.0;
  const double n = static_cast<double>(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ks = std::max({ks, (i + 1.0) / n - ps[i], ps[i] - i / n});
  }
  const double crit = 1.628 / std::sqrt(n);
  ok &= ks < crit;
  detail << "; null KS D " << num(ks) << " < " << num(crit);
  return {ok, detail.str()};
}

Outcome coverage_bound() {
  const auto s = coverage_bound_sweep(10000, 505, 1);
  return {s.violations == 0 && s.min_slack >= -1e-9,
          std::to_string(s.trials) + " draws, " + std::to_string(s.violations) + " violations, min slack " +
              num(s.min_slack)};
}

Outcome ridge_bound() {
  const auto sweep = ridge_bound_sweep(1000, 606);
  RidgeProblem id;
  id.design = MatrixXd::Identity(2, 2);
  id.lambda = 1.0;
  id.sigma = 1.0;
  id.theta_star = VectorXd::Zero(2);
  const auto mc = check_ridge_bounds(id, 100000, 607);
  const bool mc_ok = std::abs(mc.mc_mse - 0.5) <= 3.0 * mc.mc_se;
  return {sweep.violations == 0 && mc_ok,
          std::to_string(sweep.violations) + "/1000 variance-bound violations; identity MSE " + num(mc.mc_mse) +
              " vs 0.5 (3 se = " + num(3.0 * mc.mc_se) + ")"};
}

Outcome variance_identity() {
  const std::size_t trials = 1000000;
  const double tol = std::max(0.02, 4.0 / std::sqrt(static_cast<double>(trials)));
  double worst = 0.0;
  std::uint64_t stream = 0;
  for (std::size_t m : {4, 8}) {
    for (double rho : {0.0, 0.5, 1.0}) {
      const CorrelatedNoiseSpec spec{1.3, m, rho, 0.0};
      const auto c = check_variance_reduction(spec, trials, stream_seed(707, stream++));
      const double closed = 1.3 * 1.3 / static_cast<double>(m) * (1.0 + (static_cast<double>(m) - 1.0) * rho);
      worst = std::max(worst, std::abs(c.mc_var - closed) / closed);
    }
  }
  return {worst <= tol, "6 (m, rho) cells at 1e6 trials, max rel diff " + num(worst) + " (tol " + num(tol) + ")"};
}

Outcome label_reconstruction() {
  // Pairs p1-p4 belong to m1, p5-p8 to m2. Quartiles (linear) worked by hand:
  //   a1 2.75/6.25  a2 1.75/8.25  a3 3.25/5.25  a4 6/6  a5 1.75/8.25  a6 5/5
  const std::vector<std::vector<double>> scores{{8, 7, 1, 2, 5, 6, 3, 4},  {9, 1, 2, 8, 10, 0, 5, 5},
                                                {10, 9, 0, 1, 4, 4, 4, 4}, {6, 6, 6, 6, 6, 6, 6, 6},
                                                {7, 3, 2, 9, 8, 1, 9, 0},  {0, 5, 5, 5, 5, 5, 5, 10}};
  const std::vector<std::pair<double, double>> quartiles{{2.75, 6.25}, {1.75, 8.25}, {3.25, 5.25},
                                                         {6, 6},       {1.75, 8.25}, {5, 5}};
  // Per pair: votes by annotator (-1 = no vote), then expected label (-1 = discarded).
  const std::vector<std::vector<int>> votes{{1, 1, 1, -1, -1, 0},  {1, 0, 1, -1, -1, -1}, {0, -1, 0, -1, -1, -1},
                                            {0, -1, 0, -1, 1, -1}, {-1, 1, -1, -1, -1, -1}, {-1, 0, -1, -1, 0, -1},
                                            {-1, -1, -1, -1, 1, -1}, {-1, -1, -1, -1, 0, 1}};
  const std::vector<int> labels{1, -1, 0, -1, -1, 0, -1, -1};

  std::vector<AnnotationRecord> recs;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    for (std::size_t p = 0; p < 8; ++p) {
      recs.push_back({"p" + std::to_string(p + 1), p < 4 ? "m1" : "m2", "a" + std::to_string(a + 1), scores[a][p]});
    }
  }
  std::size_t wrong = 0;
  const auto res = reconstruct_labels(recs, QuartileMethod::Linear, 2);
  for (std::size_t a = 0; a < 6; ++a) {
    wrong += res.profiles[a].q1 != quartiles[a].first || res.profiles[a].q3 != quartiles[a].second;
  }
  for (std::size_t p = 0; p < 8; ++p) {
    std::vector<int> got;
    for (std::size_t a = 0; a < 6; ++a) {
      const auto v = binary_vote(scores[a][p], res.profiles[a]);
      wrong += v.value_or(-1) != votes[p][a];
      if (v) got.push_back(*v);
    }
    wrong += aggregate_label(got, 2).value_or(-1) != labels[p];
    const std::string id = "p" + std::to_string(p + 1);
    const auto it = std::find_if(res.pairs.begin(), res.pairs.end(), [&](const LabeledPair& l) { return l.pair_id == id; });
    const bool dropped = std::find(res.discarded.begin(), res.discarded.end(), id) != res.discarded.end();
    if (labels[p] < 0) {
      wrong += it != res.pairs.end() || !dropped;
    } else {
      wrong += it == res.pairs.end() || dropped || it->label != labels[p];
    }
  }
  const auto p1 = std::find_if(res.pairs.begin(), res.pairs.end(), [](const LabeledPair& l) { return l.pair_id == "p1"; });
  wrong += p1 == res.pairs.end() || p1->persuasive_votes != 3 || p1->unpersuasive_votes != 1;

  // Splits of a 40-message pair set over 100 seeds.
  std::mt19937_64 rng(808);
  std::vector<LabeledPair> pairs;
  for (int m = 0; m < 40; ++m) {
    const int n = 2 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) {
      pairs.push_back({"m" + std::to_string(m) + "-" + std::to_string(i), "m" + std::to_string(m),
                       static_cast<int>(rng() % 2), 0, 0});
    }
  }
  std::size_t overlap = 0, unbalanced = 0;
  double worst_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = message_disjoint_split(pairs, 0.2, 0.05, seed);
    for (const auto& m : s.test_messages) overlap += s.train_messages.count(m);
    unbalanced += !s.balanced || s.positive_rate_gap > 0.05;
    worst_gap = std::max(worst_gap, s.positive_rate_gap);
  }
  return {wrong == 0 && overlap == 0 && unbalanced == 0,
          std::to_string(wrong) + " mismatches against the hand derivation; 100 splits: " + std::to_string(overlap) +
              " shared messages, max gap " + num(worst_gap) + " (tol 0.05)"};
}

Outcome agreement() {
  Eigen::MatrixXi fleiss(2, 2);
  fleiss << 0, 3, 2, 1;
  const double kf = fleiss_kappa(fleiss).kappa;
  const std::vector<int> a{1, 1, 1, 0}, b{1, 1, 0, 0};
  const double kc = cohen_kappa(a, b).kappa;
  Eigen::MatrixXi full(3, 2);
  full << 3, 0, 0, 3, 3, 0;
  const double ff = fleiss_kappa(full).kappa, cf = cohen_kappa(a, a).kappa;
  const bool ok = std::abs(kf - 0.25) <= 1e-12 && std::abs(kc - 0.5) <= 1e-12 && ff == 1.0 && cf == 1.0;
  return {ok, "Fleiss " + num(kf) + " (0.25), Cohen " + num(kc) + " (0.5), full agreement " + num(ff) + " / " +
                  num(cf)};
}

Outcome budget_sweep() {
  std::mt19937_64 rng(909);
  std::normal_distribution<double> normal;
  const std::size_t sources = 5;
  std::vector<EmbeddingGroup> groups;
  for (int in = 0; in < 40; ++in) {
    EmbeddingGroup g{"in" + std::to_string(in), "b", {}, EmbeddingMatrixd(static_cast<Index>(sources * 3), 6)};
    for (std::size_t s = 0; s < sources; ++s) {
      Eigen::RowVectorXd center(6);
      for (Index k = 0; k < 6; ++k) center[k] = 4.0 * normal(rng);
      for (std::size_t r = 0; r < 3; ++r) {
        const auto row = static_cast<Index>(s * 3 + r);
        g.members.push_back({"s" + std::to_string(s), s < 3 ? "gen-a" : "gen-b", static_cast<std::size_t>(row)});
        for (Index k = 0; k < 6; ++k) g.embeddings(row, k) = center[k] + 0.3 * normal(rng);
      }
    }
    groups.push_back(std::move(g));
  }
  const auto sweep = random_budget_sweep(groups, {1, 2, 3, 4, 5}, 20, 910);
  std::size_t violations = 0;
  std::string trail;
  for (std::size_t i = 0; i < sweep.cells.size(); ++i) {
    const auto& c = sweep.cells[i];
    trail += (i ? " " : "") + num(std::round(c.r_avg * 1000) / 1000);
    if (i == 0) continue;
    const auto& p = sweep.cells[i - 1];
    violations += (c.r_avg > p.r_avg + p.se_r_avg) + (c.r_max > p.r_max + p.se_r_max);
  }
  const auto& last = sweep.cells.back();
  const bool zero = last.r_avg == 0.0 && last.r_max == 0.0;
  return {violations == 0 && zero, "r_avg by B: " + trail + "; " + std::to_string(violations) +
                                       " monotonicity violations; B=K gives " + num(last.r_avg) + "/" +
                                       num(last.r_max)};
}

Outcome greedy_approx() {
  std::mt19937_64 rng(1111);
  std::size_t violations = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 3 + static_cast<Index>(rng() % 10);
    const auto pool = gaussian(n, 1 + static_cast<Index>(rng() % 5), rng);
    const auto k = 1 + static_cast<std::size_t>(rng() % std::min<std::size_t>(5, static_cast<std::size_t>(n)));
    const auto sel = greedy_select(pool, k, static_cast<std::uint64_t>(rep));
    const double opt = oracle::optimal_k_center(to_rows(pool), k);
    if (opt > 0) worst = std::max(worst, sel.coverage.r_max / opt);
    violations += sel.coverage.r_max > 2.0 * opt + 1e-12;
  }
  return {violations == 0, "200 instances, " + std::to_string(violations) + " violations, worst ratio " + num(worst)};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ratkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome determinism() {
  double slowest = 0.0;
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* threads : {"1", "4"}) {
    const auto dir = kTmp / ("report-" + std::string(threads));
    fs::remove_all(dir);
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli({"--seed", "2024", "--threads", threads, "--out-dir", dir.string(), "report",
                          "--annotations", (kFixtures / "annotations.jsonl").string(), "--rationales",
                          (kFixtures / "rationales.jsonl").string(), "--predictions",
                          (kFixtures / "predictions.jsonl").string(), "--judgments",
                          (kFixtures / "judgments.jsonl").string(), "--preferences",
                          (kFixtures / "preferences.jsonl").string(), "--family-map",
                          (kFixtures / "families.csv").string()});
    slowest = std::max(slowest, seconds_since(t0));
    if (code != 0) return {false, "report exited " + std::to_string(code)};
    trees.push_back(tree(dir));
  }
  const bool same = trees[0] == trees[1];
  return {same && slowest < 60.0, std::to_string(trees[0].size()) + " files, " +
                                      (same ? "byte-identical" : "DIFFERENT") + " at 1 vs 4 threads; slowest run " +
                                      num(std::round(slowest * 100) / 100) + "s (limit 60s)"};
}

// Faithfulness cells in lexicographic (model, setup) order, and preference wins out of 50
// for the 15 lexicographic model pairs, constructed offline for r ~ 0.771.
const std::array<std::pair<const char*, const char*>, 6> kRows{{{"phi-3.5-vision", "base"},
                                                                {"phi-3.5-vision", "grpo"},
                                                                {"phi-3.5-vision", "reasoning-sft"},
                                                                {"qwen2.5-vl-7b", "base"},
                                                                {"qwen2.5-vl-7b", "grpo"},
                                                                {"qwen2.5-vl-7b", "reasoning-sft"}}};
const std::array<double, 6> kConsistency{0.99, 0.904, 0.99, 0.962, 0.9, 0.995};
const std::array<double, 6> kGroundedness{0.708, 0.751, 0.703, 0.727, 0.78, 0.847};
const std::array<double, 6> kSensitivity{0.766, 0.517, 0.665, 0.885, 0.737, 0.746};
constexpr std::array<int, 15> kPreferenceWins{36, 35, 6, 50, 37, 7, 12, 7, 9, 7, 2, 5, 50, 43, 37};
constexpr double kTargetR = 0.771;

Outcome faithfulness_plumbing() {
  const std::size_t items = 1000;
  std::mt19937_64 rng(1313);
  std::vector<JudgmentRecord> judgments;
  std::vector<PredictionRecord> predictions;
  for (std::size_t m = 0; m < kRows.size(); ++m) {
    const auto [model, setup] = kRows[m];
    auto ones = [&](double target) {
      std::vector<int> v(items, 0);
      std::fill_n(v.begin(), std::llround(target * items), 1);
      std::shuffle(v.begin(), v.end(), rng);
      return v;
    };
    const auto c = ones(kConsistency[m]), g = ones(kGroundedness[m]), s = ones(kSensitivity[m]);
    for (std::size_t i = 0; i < items; ++i) {
      const std::string id = "x" + std::to_string(i);
      judgments.push_back({id, model, setup, FaithMetric::Consistency, "j", c[i]});
      judgments.push_back({id, model, setup, FaithMetric::Groundedness, "j", g[i]});
      predictions.push_back({id, model, setup, 1, 1, s[i] ? -0.2 : -0.9, s[i] ? -0.9 : -0.2});
    }
  }
  std::vector<PreferenceRecord> prefs;
  std::vector<std::string> keys;
  for (const auto& [model, setup] : kRows) keys.push_back(model_key(model, setup));
  oracle::Vec deltas, rates;
  std::size_t pair = 0;
  for (std::size_t a = 0; a < keys.size(); ++a) {
    for (std::size_t b = a + 1; b < keys.size(); ++b, ++pair) {
      for (int i = 0; i < 50; ++i) {
        const bool a_wins = i < kPreferenceWins[pair];
        prefs.push_back({"item" + std::to_string(i), keys[a], keys[b], "r", a_wins ? Winner::A : Winner::B});
      }
      deltas.push_back(kSensitivity[a] - kSensitivity[b]);
      rates.push_back(kPreferenceWins[pair] / 50.0);
    }
  }

  // Cells reproduce the construction targets exactly.
  const auto table = faithfulness_table(judgments, predictions);
  std::size_t exact = 0;
  for (std::size_t m = 0; m < kRows.size(); ++m) {
    const auto [model, setup] = kRows[m];
    exact += table.find(model, setup, FaithColumn::Consistency)->mean == kConsistency[m];
    exact += table.find(model, setup, FaithColumn::Groundedness)->mean == kGroundedness[m];
    exact += table.find(model, setup, FaithColumn::Sensitivity)->mean == kSensitivity[m];
  }

  // In-memory correlation against the independent oracle and the target.
  std::map<std::string, double> sens;
  for (std::size_t m = 0; m < kRows.size(); ++m) sens[keys[m]] = *table.find(kRows[m].first, kRows[m].second, FaithColumn::Sensitivity)->mean;
  AlignmentOptions opt;
  opt.permutations = 999;
  const auto al = metric_preference_alignment(preference_summary(prefs), sens, opt, "sensitivity");
  const double r = al.correlation->pearson_r;
  const double r_oracle = oracle::pearson(deltas, rates);

  // Same numbers through the CLI, reading the files the tool itself wrote.
  const auto dir = kTmp / "faithfulness";
  fs::remove_all(dir);
  write_file(dir / "judgments.jsonl", to_jsonl(judgments));
  write_file(dir / "predictions.jsonl", to_jsonl(predictions));
  write_file(dir / "preferences.jsonl", to_jsonl(prefs));
  double r_cli = std::nan("");
  if (cli({"--out-dir", dir.string(), "faithfulness", "--judgments", (dir / "judgments.jsonl").string(),
           "--predictions", (dir / "predictions.jsonl").string()}) == 0 &&
      cli({"--out-dir", dir.string(), "--correlation-permutations", "99", "align", "--preferences",
           (dir / "preferences.jsonl").string(), "--faithfulness", (dir / "faithfulness.csv").string()}) == 0) {
    const auto j = ojson::parse(read_file(dir / "alignment.json"));
    for (const auto& a : j["alignments"]) {
      if (a["metric"] == "sensitivity" && a["scope"] == "all") r_cli = a["correlation"]["pearson_r"].get<double>();
    }
  }
  const bool ok = exact == 18 && std::abs(r - kTargetR) <= 1e-3 && std::abs(r - r_oracle) <= 1e-12 &&
                  std::abs(r_cli - r) <= 1e-12;
  return {ok, std::to_string(exact) + "/18 cells exact; r " + num(r) + " vs target 0.771 (tol 1e-3), oracle " +
                  num(r_oracle) + ", via CLI " + num(r_cli)};
}

}  // namespace

int main() {
  fs::create_directories(kTmp);
  criterion(1, "proxy-oracle equivalence", proxy_oracle);
  criterion(2, "coverage monotonicity", coverage_monotone);
  criterion(3, "Gram/direct eigen-path agreement", eigen_paths);
  criterion(4, "PERMANOVA exactness and calibration", permanova_calibration);
  criterion(5, "coverage bound sweep", coverage_bound);
  criterion(6, "ridge variance bound", ridge_bound);
  criterion(7, "equicorrelated mean variance", variance_identity);
  criterion(8, "label reconstruction and split", label_reconstruction);
  criterion(9, "agreement metrics", agreement);
  criterion(10, "random budget sweep", budget_sweep);
  criterion(11, "greedy k-center approximation", greedy_approx);
  criterion(12, "pipeline determinism", determinism);
  criterion(13, "faithfulness plumbing", faithfulness_plumbing);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
