#include "ratkit/pipeline.hpp"

#include "ratkit/budget.hpp"
#include "ratkit/diversity.hpp"
#include "ratkit/faithfulness.hpp"
#include "ratkit/labels.hpp"
#include "ratkit/metrics.hpp"
#include "ratkit/permutation.hpp"
#include "ratkit/records.hpp"
#include "ratkit/theory.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

namespace ratkit {

namespace {

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

std::string path_text(const fs::path& p) { return p.generic_string(); }

ojson json_ratio(const Ratio& r) {
  ojson j;
  j["value"] = json_real(r.value);
  if (!r.value) j["reason"] = r.reason;
  return j;
}

ojson json_correlation(const CorrelationResult& c) {
  ojson j;
  j["pearson_r"] = json_real(c.pearson_r);
  j["spearman_rho"] = json_real(c.spearman_rho);
  j["p_value"] = c.p_value;
  j["n"] = c.n;
  j["permutations"] = c.permutations;
  return j;
}

// Correlation that reports why it is undefined instead of failing the command.
ojson try_correlate(std::span<const double> x, std::span<const double> y, const RunConfig& config) {
  try {
    return json_correlation(correlate(x, y, config.correlation_permutations, config.seed, config.threads));
  } catch (const ValidationError& e) {
    ojson j;
    j["note"] = e.what();
    return j;
  }
}

ojson json_matrix(const MatrixXd& m) {
  ojson rows = ojson::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(json_real(m(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

ojson json_matrix(const Eigen::MatrixXi& m) {
  ojson rows = ojson::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rationale loading shared by diversity, permanova and coverage-budget.

struct RationaleSet {
  std::vector<RationaleRecord> records;
  GroupMap groups;
  std::vector<std::string> backends;    // selected, sorted
  std::vector<std::string> generators;  // selected, sorted
};

RationaleSet load_rationale_set(const fs::path& path, const std::vector<std::string>& backends,
                                const std::string& generator) {
  RationaleSet set;
  set.records = load_rationales(path);
  if (set.records.empty()) throw ValidationError("no rationale records in '" + path_text(path) + "'");
  set.groups = group_embeddings(set.records);

  std::set<std::string> all_backends, all_generators;
  for (const auto& r : set.records) {
    all_backends.insert(r.backend_id);
    all_generators.insert(r.generator_id);
  }
  if (backends.empty()) {
    set.backends.assign(all_backends.begin(), all_backends.end());
  } else {
    for (const auto& b : backends) {
      if (!all_backends.count(b)) throw ValidationError("backend '" + b + "' does not occur in '" + path_text(path) + "'");
    }
    std::set<std::string> uniq(backends.begin(), backends.end());
    set.backends.assign(uniq.begin(), uniq.end());
  }
  if (generator.empty()) {
    set.generators.assign(all_generators.begin(), all_generators.end());
  } else {
    if (!all_generators.count(generator)) {
      throw ValidationError("generator '" + generator + "' does not occur in '" + path_text(path) + "'");
    }
    set.generators = {generator};
  }
  return set;
}

std::vector<EmbeddingGroup> backend_groups(const RationaleSet& set, const std::string& backend, bool normalize) {
  auto groups = groups_for_backend(set.groups, backend);
  if (normalize) normalize_groups(groups);
  return groups;
}

// ---------------------------------------------------------------------------
// Diversity

using ProxyField = std::optional<double> ProxyRow::*;

struct ProxyDef {
  const char* name;
  ProxyField field;
};

constexpr ProxyDef kProxies[] = {
    {"r_avg", &ProxyRow::r_avg},   {"r_max", &ProxyRow::r_max},       {"erank", &ProxyRow::erank},
    {"logdet", &ProxyRow::logdet}, {"pr", &ProxyRow::pr},             {"anisotropy", &ProxyRow::anisotropy},
    {"d_pair", &ProxyRow::d_pair}, {"sim_avg", &ProxyRow::sim_avg},   {"near_dup_rate", &ProxyRow::near_dup_rate},
};

ProxyField proxy_field(std::string_view name) {
  for (const auto& p : kProxies) {
    if (name == p.name) return p.field;
  }
  throw std::logic_error("unknown proxy");
}

std::vector<double> proxy_values(const std::vector<ProxyRow>& rows, ProxyField field) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back((r.*field).value_or(std::numeric_limits<double>::quiet_NaN()));
  return v;
}

ojson summarize_values(const std::vector<double>& values) {
  std::vector<double> defined;
  for (double x : values) {
    if (std::isfinite(x)) defined.push_back(x);
  }
  ojson j;
  j["n"] = defined.size();
  if (defined.empty()) {
    j["mean"] = nullptr;
    j["median"] = nullptr;
    return j;
  }
  double sum = 0.0;
  for (double x : defined) sum += x;
  std::sort(defined.begin(), defined.end());
  const std::size_t n = defined.size();
  j["mean"] = sum / static_cast<double>(n);
  j["median"] = n % 2 ? defined[n / 2] : 0.5 * (defined[n / 2 - 1] + defined[n / 2]);
  return j;
}

std::vector<ProxyRow> per_input_proxies(const std::vector<EmbeddingGroup>& groups, const std::string& generator,
                                        const SourceSubset& subset, const RunConfig& config) {
  std::vector<std::optional<ProxyRow>> slots(groups.size());
  parallel_for(groups.size(), config.threads, [&](std::size_t i) {
    const auto& g = groups[i];
    const EmbeddingGroup sel = g.filter([&](const GroupMember& m) {
      if (!generator.empty() && m.generator_id != generator) return false;
      return subset.sources.empty() ||
             std::find(subset.sources.begin(), subset.sources.end(), m.source_id) != subset.sources.end();
    });
    if (sel.size() == 0) return;
    slots[i] = proxy_row(sel, g, config.alpha, config.tau);
  });
  std::vector<ProxyRow> rows;
  for (auto& s : slots) {
    if (s) rows.push_back(std::move(*s));
  }
  return rows;
}

// Per-input proxy correlation between two backends over inputs present in both.
ojson cross_backend(const std::vector<ProxyRow>& a, const std::vector<ProxyRow>& b, std::string_view proxy,
                    const RunConfig& config) {
  const ProxyField f = proxy_field(proxy);
  std::map<std::string, double> bmap;
  for (const auto& r : b) bmap[r.input_id] = (r.*f).value_or(std::numeric_limits<double>::quiet_NaN());
  std::vector<double> x, y;
  for (const auto& r : a) {
    auto it = bmap.find(r.input_id);
    if (it == bmap.end()) continue;
    x.push_back((r.*f).value_or(std::numeric_limits<double>::quiet_NaN()));
    y.push_back(it->second);
  }
  ojson j = try_correlate(x, y, config);
  j["proxy"] = std::string(proxy);
  return j;
}

ojson matrix_robustness(const SourcePairMatrices& a, const SourcePairMatrices& b, const RunConfig& config) {
  ojson j;
  if (a.sources != b.sources) {
    j["note"] = "source sets differ between backends";
    return j;
  }
  auto one = [&](const MatrixXd& x, const MatrixXd& y) {
    try {
      return json_correlation(
          matrix_uppertri_correlation(x, y, config.correlation_permutations, config.seed, config.threads));
    } catch (const ValidationError& e) {
      ojson n;
      n["note"] = e.what();
      return n;
    }
  };
  j["cosine_mean"] = one(a.cosine_mean, b.cosine_mean);
  j["near_dup"] = one(a.near_dup, b.near_dup);
  return j;
}

std::vector<std::string> sorted_sources(const std::vector<RationaleRecord>& records) {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.source_id);
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// Faithfulness table round trip through CSV.

const FaithColumn kColumns[] = {FaithColumn::Consistency, FaithColumn::Groundedness, FaithColumn::Sensitivity};

std::string faithfulness_csv(const FaithfulnessTable& table, const ojson& header) {
  CsvTable t({"model_id", "setup_id", "consistency", "groundedness", "sensitivity", "n_consistency",
              "n_groundedness", "n_sensitivity"});
  for (const auto& [model, setup] : table.rows()) {
    std::vector<std::string> row{model, setup};
    std::vector<std::string> counts;
    for (FaithColumn c : kColumns) {
      const FaithfulnessCell* cell = table.find(model, setup, c);
      row.push_back(cell ? format_optional(cell->mean) : std::string());
      counts.push_back(std::to_string(cell ? cell->count : 0));
    }
    row.insert(row.end(), counts.begin(), counts.end());
    t.add_row(std::move(row));
  }
  return t.str(&header);
}

using MetricMaps = std::map<std::string, std::map<std::string, double>>;  // metric -> model key -> value

MetricMaps metric_maps_from_table(const FaithfulnessTable& table) {
  MetricMaps maps;
  for (FaithColumn c : kColumns) maps[std::string(to_string(c))];
  for (const auto& [model, setup] : table.rows()) {
    for (FaithColumn c : kColumns) {
      const FaithfulnessCell* cell = table.find(model, setup, c);
      if (cell && cell->mean) maps[std::string(to_string(c))][model_key(model, setup)] = *cell->mean;
    }
  }
  return maps;
}

MetricMaps metric_maps_from_csv(const fs::path& path) {
  const CsvDocument doc = parse_csv(read_file(path));
  const std::size_t model = doc.column("model_id");
  const std::size_t setup = doc.column("setup_id");
  MetricMaps maps;
  for (FaithColumn c : kColumns) {
    const std::string name(to_string(c));
    const std::size_t col = doc.column(name);
    auto& m = maps[name];
    for (const auto& row : doc.rows) {
      if (row[col].empty()) continue;
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(row[col], &used);
        if (used != row[col].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ValidationError("'" + path_text(path) + "': column '" + name + "' has non-numeric value '" + row[col] +
                              "'");
      }
      const std::string key = model_key(row[model], row[setup]);
      if (!m.emplace(key, v).second) throw ValidationError("'" + path_text(path) + "': duplicate row for " + key);
    }
  }
  return maps;
}

ojson json_alignment(const AlignmentResult& a) {
  ojson j;
  j["metric"] = a.metric;
  j["scope"] = a.scope;
  j["pairwise_accuracy"] = json_real(a.pairwise_accuracy);
  j["decided_pairs"] = a.decided_pairs;
  j["metric_ties"] = a.metric_ties;
  j["preference_ties"] = a.preference_ties;
  if (a.correlation) {
    j["correlation"] = json_correlation(*a.correlation);
  } else {
    j["correlation"] = nullptr;
    j["correlation_note"] = a.correlation_note;
  }
  ojson pts = ojson::array();
  for (const auto& p : a.points) {
    pts.push_back(ojson{{"pair_id", p.pair_id}, {"delta_metric", p.delta_metric}, {"preference_rate", p.preference_rate}});
  }
  j["points"] = std::move(pts);
  return j;
}

CommandResult align_impl(const RunConfig& config, const std::vector<PreferenceRecord>& prefs, const MetricMaps& maps,
                         const std::optional<std::map<std::string, std::string>>& family, bool majority,
                         ojson header) {
  const PreferenceSummary summary = preference_summary(prefs);
  AlignmentOptions opts;
  opts.majority = majority;
  opts.permutations = config.correlation_permutations;
  opts.seed = config.seed;
  opts.threads = config.threads;

  ojson report;
  report["header"] = std::move(header);
  report["kind"] = "alignment";
  report["preference_rate"] = majority ? "majority" : "raw";

  ojson models = ojson::array();
  for (const auto& m : summary.models) {
    models.push_back(ojson{{"model", m}, {"win_rate", summary.win_rate.at(m)}, {"judgments", summary.judgments.at(m)}});
  }
  ojson pairs = ojson::array();
  for (const auto& [pair, tally] : summary.pairs) {
    pairs.push_back(ojson{{"model_a", pair.first},
                          {"model_b", pair.second},
                          {"a_wins", tally.first_wins},
                          {"b_wins", tally.second_wins},
                          {"rate_a", tally.first_rate()}});
  }
  report["preferences"] = ojson{{"total", summary.total}, {"models", std::move(models)}, {"pairs", std::move(pairs)}};

  ojson alignments = ojson::array();
  ojson skipped = ojson::array();
  std::ostringstream text;
  for (const auto& [metric, values] : maps) {
    std::vector<std::string> missing;
    for (const auto& m : summary.models) {
      if (!values.count(m)) missing.push_back(m);
    }
    if (missing.size() == summary.models.size()) {
      skipped.push_back(ojson{{"metric", metric}, {"reason", "no model in the preferences has this metric"}});
      continue;
    }
    if (!missing.empty()) {
      throw ValidationError("align: metric '" + metric + "' has no value for model '" + missing.front() + "'");
    }
    std::vector<AlignmentResult> results;
    if (family) {
      results = alignment_by_family(summary, values, *family, opts, metric);
    } else {
      results.push_back(metric_preference_alignment(summary, values, opts, metric));
      results.back().scope = "all";
    }
    for (const auto& r : results) {
      alignments.push_back(json_alignment(r));
      text << metric << " [" << r.scope << "]: accuracy " << format_optional(r.pairwise_accuracy);
      if (r.correlation) {
        text << ", r " << format_real(r.correlation->pearson_r) << ", rho " << format_real(r.correlation->spearman_rho)
             << ", p " << format_real(r.correlation->p_value);
      }
      text << "\n";
    }
  }
  report["alignments"] = std::move(alignments);
  report["skipped_metrics"] = std::move(skipped);

  CommandResult out;
  out.files.add(config.out_dir / "alignment.json", dump(report));
  out.files.merge(export_plot_data(report, config.out_dir / "plots"));
  out.summary = text.str();
  out.report = std::move(report);
  return out;
}

// ---------------------------------------------------------------------------
// Theory checks

constexpr std::size_t kCoverageDraws = 10000;
constexpr std::size_t kRidgeTrials = 100000;
constexpr std::size_t kRidgeInstances = 1000;
constexpr std::size_t kVarianceTrials = 1000000;

}  // namespace

std::string model_key(std::string_view model_id, std::string_view setup_id) {
  std::string key(model_id);
  if (!setup_id.empty()) {
    key += '/';
    key += setup_id;
  }
  return key;
}

std::map<std::string, std::string> load_family_map(const fs::path& path) {
  const std::string text = read_file(path);
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ValidationError("'" + path_text(path) + "' line " + std::to_string(no) + ": expected 'model,family'");
    }
    const std::string model = trim(line.substr(0, comma));
    const std::string fam = trim(line.substr(comma + 1));
    if (model == "model" && fam == "family") continue;  // header
    if (model.empty() || fam.empty()) {
      throw ValidationError("'" + path_text(path) + "' line " + std::to_string(no) + ": empty model or family");
    }
    if (!out.emplace(model, fam).second) {
      throw ValidationError("'" + path_text(path) + "' line " + std::to_string(no) + ": duplicate model '" + model + "'");
    }
  }
  return out;
}

CommandResult run_reconstruct(const RunConfig& config, const fs::path& annotations) {
  const auto records = load_annotations(annotations);
  if (records.empty()) throw ValidationError("no annotation records in '" + path_text(annotations) + "'");
  const ReconstructionResult rec = reconstruct_labels(records, config.quartile_method, config.min_votes);
  const SplitResult split =
      message_disjoint_split(rec.pairs, config.test_fraction, config.balance_tol, config.seed);

  ojson report;
  report["header"] = report_header("reconstruct", config, {{"annotations", path_text(annotations)}});
  report["kind"] = "reconstruct";
  ojson profiles = ojson::array();
  for (const auto& p : rec.profiles) {
    profiles.push_back(ojson{{"annotator_id", p.annotator_id}, {"q1", p.q1}, {"q3", p.q3}, {"n_scores", p.n_scores}});
  }
  report["annotators"] = std::move(profiles);
  report["pairs_total"] = rec.pairs.size() + rec.discarded.size();
  report["pairs_retained"] = rec.pairs.size();
  report["pairs_discarded"] = rec.discarded.size();
  report["discarded"] = rec.discarded;
  report["positive_rate"] = json_real(rec.pairs.empty() ? std::nullopt : std::optional(positive_rate(rec.pairs)));
  ojson sp;
  sp["train_pairs"] = split.train.size();
  sp["test_pairs"] = split.test.size();
  sp["train_messages"] = split.train_messages.size();
  sp["test_messages"] = split.test_messages.size();
  sp["train_positive_rate"] = json_real(split.train.empty() ? std::nullopt : std::optional(positive_rate(split.train)));
  sp["test_positive_rate"] = json_real(split.test.empty() ? std::nullopt : std::optional(positive_rate(split.test)));
  sp["positive_rate_gap"] = split.positive_rate_gap;
  sp["balanced"] = split.balanced;
  sp["attempts"] = split.attempts;
  report["split"] = std::move(sp);

  CommandResult out;
  out.files.add(config.out_dir / "train.jsonl", to_jsonl(split.train));
  out.files.add(config.out_dir / "test.jsonl", to_jsonl(split.test));
  out.files.add(config.out_dir / "reconstruct_summary.json", dump(report));
  std::ostringstream text;
  text << "retained " << rec.pairs.size() << " of " << rec.pairs.size() + rec.discarded.size() << " pairs; split "
       << split.train.size() << " train / " << split.test.size() << " test, positive-rate gap "
       << format_real(split.positive_rate_gap) << (split.balanced ? "" : " (NOT within tolerance)") << "\n";
  out.summary = text.str();
  out.report = std::move(report);
  return out;
}

CommandResult run_diversity(const RunConfig& config, const DiversityArgs& args) {
  const RationaleSet set = load_rationale_set(args.rationales, args.backends, args.generator);
  std::vector<SourceSubset> subsets = args.subsets;
  if (subsets.empty()) subsets.push_back({"all", {}});
  {
    const auto known = sorted_sources(set.records);
    std::set<std::string> names;
    for (const auto& s : subsets) {
      if (!names.insert(s.name).second) throw ValidationError("duplicate subset name '" + s.name + "'");
      for (const auto& src : s.sources) {
        if (!std::binary_search(known.begin(), known.end(), src)) {
          throw ValidationError("subset '" + s.name + "' names unknown source '" + src + "'");
        }
      }
    }
  }

  const ojson header = report_header("diversity", config, {{"rationales", path_text(args.rationales)}});
  CsvTable per_input({"backend", "generator", "subset", "input_id", "members", "r_avg", "r_max", "erank", "logdet",
                      "pr", "anisotropy", "d_pair", "sim_avg", "near_dup_rate"});
  ojson rows = ojson::array();
  ojson relations = ojson::array();
  ojson source_pairs = ojson::array();
  // (generator, subset) -> backend -> per-input rows, kept for the cross-backend comparison
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<ProxyRow>>> kept;
  std::map<std::string, std::map<std::string, SourcePairMatrices>> matrices;  // generator -> backend
  std::ostringstream text;

  for (const auto& backend : set.backends) {
    const auto groups = backend_groups(set, backend, config.normalize);
    for (const auto& gen : set.generators) {
      for (const auto& subset : subsets) {
        auto prox = per_input_proxies(groups, gen, subset, config);
        for (const auto& r : prox) {
          std::vector<std::string> cells{backend, gen, subset.name, r.input_id, std::to_string(r.members)};
          for (const auto& p : kProxies) cells.push_back(format_optional(r.*(p.field)));
          per_input.add_row(std::move(cells));
        }
        ojson row;
        row["backend"] = backend;
        row["generator"] = gen;
        row["subset"] = subset.name;
        row["sources"] = subset.sources;
        row["inputs"] = prox.size();
        ojson stats;
        for (const auto& p : kProxies) stats[p.name] = summarize_values(proxy_values(prox, p.field));
        {
          std::vector<double> dist = proxy_values(prox, &ProxyRow::sim_avg);
          for (double& x : dist) x = 1.0 - x;
          stats["cos_dist_avg"] = summarize_values(dist);
        }
        row["proxies"] = std::move(stats);
        rows.push_back(std::move(row));

        const auto erank = proxy_values(prox, &ProxyRow::erank);
        ojson rel;
        rel["backend"] = backend;
        rel["generator"] = gen;
        rel["subset"] = subset.name;
        rel["erank_vs_r_avg"] = try_correlate(erank, proxy_values(prox, &ProxyRow::r_avg), config);
        rel["erank_vs_sim_avg"] = try_correlate(erank, proxy_values(prox, &ProxyRow::sim_avg), config);
        relations.push_back(std::move(rel));

        text << backend << " / " << (gen.empty() ? "-" : gen) << " / " << subset.name << ": " << prox.size()
             << " inputs\n";
        kept[{gen, subset.name}][backend] = std::move(prox);
      }

      SourcePairMatrices spm = source_pair_matrices(groups, config.tau, gen);
      ojson sp;
      sp["backend"] = backend;
      sp["generator"] = gen;
      sp["sources"] = spm.sources;
      sp["cosine_mean"] = json_matrix(spm.cosine_mean);
      sp["distance"] = json_matrix(spm.distance);
      sp["near_dup"] = json_matrix(spm.near_dup);
      sp["common_inputs"] = json_matrix(spm.common_inputs);
      source_pairs.push_back(std::move(sp));
      matrices[gen][backend] = std::move(spm);
    }
  }

  ojson robustness = ojson::array();
  for (std::size_t i = 0; i < set.backends.size(); ++i) {
    for (std::size_t k = i + 1; k < set.backends.size(); ++k) {
      const auto& a = set.backends[i];
      const auto& b = set.backends[k];
      for (const auto& gen : set.generators) {
        ojson r;
        r["backend_a"] = a;
        r["backend_b"] = b;
        r["generator"] = gen;
        ojson per = ojson::array();
        const auto& byb = kept.at({gen, subsets.front().name});
        for (const char* proxy : {"sim_avg", "logdet", "erank", "anisotropy"}) {
          per.push_back(cross_backend(byb.at(a), byb.at(b), proxy, config));
        }
        r["subset"] = subsets.front().name;
        r["per_input"] = std::move(per);
        r["source_pair_matrices"] = matrix_robustness(matrices.at(gen).at(a), matrices.at(gen).at(b), config);
        robustness.push_back(std::move(r));
      }
    }
  }

  ojson lengths = ojson::object();
  {
    std::vector<RationaleRecord> first;
    for (const auto& r : set.records) {
      if (r.backend_id == set.backends.front()) first.push_back(r);
    }
    for (const auto& [source, g] : length_by_source(first)) {
      lengths[source] = ojson{{"avg_tokens", json_real(g.texts ? std::optional(g.avg_tokens) : std::nullopt)},
                              {"texts", g.texts},
                              {"missing", g.missing}};
    }
  }

  ojson report;
  report["header"] = header;
  report["kind"] = "diversity";
  report["normalized"] = config.normalize;
  report["rows"] = std::move(rows);
  report["relations"] = std::move(relations);
  report["source_pairs"] = std::move(source_pairs);
  report["backend_robustness"] = std::move(robustness);
  report["lengths"] = std::move(lengths);

  CommandResult out;
  out.files.add(args.per_input.value_or(config.out_dir / "diversity_per_input.csv"), per_input.str(&header));
  out.files.add(args.summary.value_or(config.out_dir / "diversity_summary.json"), dump(report));
  out.summary = text.str();
  out.report = std::move(report);
  return out;
}

CommandResult run_permanova(const RunConfig& config, const PermanovaArgs& args) {
  const RationaleSet set = load_rationale_set(args.rationales, args.backends, args.generator);
  const ojson header = report_header("permanova", config, {{"rationales", path_text(args.rationales)}});
  CsvTable table({"backend", "generator", "n", "k", "pseudo_f", "r_squared", "p_value", "permutations"});
  ojson rows = ojson::array();
  std::ostringstream text;
  for (const auto& backend : set.backends) {
    const auto groups = backend_groups(set, backend, config.normalize);
    for (const auto& gen : set.generators) {
      const Residuals res = residualize(groups, gen);
      const PermanovaResult r = permanova(res, config.permutations, config.seed, config.threads);
      const bool inf = std::isinf(r.f_stat);
      ojson row;
      row["backend"] = backend;
      row["generator"] = gen;
      row["n"] = r.n;
      row["k"] = r.k;
      row["sources"] = res.sources;
      row["inputs"] = res.blocks.size();
      row["excluded_inputs"] = res.excluded_inputs;
      row["pseudo_f"] = inf ? ojson(nullptr) : ojson(r.f_stat);
      row["f_infinite"] = inf;
      row["r_squared"] = r.r_squared;
      row["p_value"] = r.p_value;
      row["permutations"] = r.permutations;
      row["ss_total"] = r.ss_total;
      row["ss_within"] = r.ss_within;
      row["ss_between"] = r.ss_between;
      rows.push_back(std::move(row));
      table.add_row({backend, gen, std::to_string(r.n), std::to_string(r.k), format_real(r.f_stat),
                     format_real(r.r_squared), format_real(r.p_value), std::to_string(r.permutations)});
      text << backend << " / " << (gen.empty() ? "-" : gen) << ": F " << format_real(r.f_stat) << ", R2 "
           << format_real(r.r_squared) << ", p " << format_real(r.p_value) << "\n";
    }
  }
  ojson report;
  report["header"] = header;
  report["kind"] = "permanova";
  report["min_attainable_p"] = 1.0 / static_cast<double>(config.permutations + 1);
  report["rows"] = std::move(rows);

  CommandResult out;
  out.files.add(config.out_dir / "permanova.json", dump(report));
  out.files.add(config.out_dir / "permanova.csv", table.str(&header));
  out.summary = text.str();
  out.report = std::move(report);
  return out;
}

CommandResult run_coverage_budget(const RunConfig& config, const BudgetArgs& args) {
  const RationaleSet set = load_rationale_set(args.rationales, args.backends, args.generator);
  const ojson header = report_header("coverage-budget", config, {{"rationales", path_text(args.rationales)}});
  std::vector<std::string> cols{"backend", "generator"};
  for (auto b : config.budgets) cols.push_back("r_avg_B" + std::to_string(b));
  for (auto b : config.budgets) cols.push_back("r_max_B" + std::to_string(b));
  CsvTable table(cols);
  ojson rows = ojson::array();
  ojson greedy = ojson::array();
  std::ostringstream text;

  for (const auto& backend : set.backends) {
    const auto groups = backend_groups(set, backend, config.normalize);
    for (const auto& gen : set.generators) {
      const BudgetSweepResult sweep =
          random_budget_sweep(groups, config.budgets, config.draws, config.seed, gen, config.threads);
      std::vector<std::string> cells{backend, gen};
      std::vector<std::string> maxes;
      ojson jcells = ojson::array();
      for (const auto& c : sweep.cells) {
        const bool any = c.inputs > 0;
        cells.push_back(any ? format_real(c.r_avg) : std::string());
        maxes.push_back(any ? format_real(c.r_max) : std::string());
        jcells.push_back(ojson{{"budget", c.budget},
                               {"r_avg", any ? ojson(c.r_avg) : ojson(nullptr)},
                               {"r_max", any ? ojson(c.r_max) : ojson(nullptr)},
                               {"se_r_avg", any ? ojson(c.se_r_avg) : ojson(nullptr)},
                               {"se_r_max", any ? ojson(c.se_r_max) : ojson(nullptr)},
                               {"inputs", c.inputs},
                               {"skipped", c.skipped}});
      }
      cells.insert(cells.end(), maxes.begin(), maxes.end());
      table.add_row(std::move(cells));
      rows.push_back(ojson{{"backend", backend}, {"generator", gen}, {"draws", sweep.draws}, {"cells", std::move(jcells)}});
      text << backend << " / " << (gen.empty() ? "-" : gen) << ": swept budgets";
      for (auto b : config.budgets) text << ' ' << b;
      text << "\n";

      if (args.greedy) {
        ojson gcells = ojson::array();
        for (auto b : config.budgets) {
          std::vector<std::optional<CoverageResult<double>>> res(groups.size());
          parallel_for(groups.size(), config.threads, [&](std::size_t i) {
            const EmbeddingGroup pool =
                groups[i].filter([&](const GroupMember& m) { return gen.empty() || m.generator_id == gen; });
            if (pool.size() < static_cast<Index>(b)) return;
            res[i] = greedy_select(pool.embeddings, b, stream_seed(config.seed, i)).coverage;
          });
          double sa = 0.0, sm = 0.0;
          std::size_t n = 0;
          for (const auto& r : res) {
            if (!r) continue;
            sa += r->r_avg;
            sm += r->r_max;
            ++n;
          }
          gcells.push_back(ojson{{"budget", b},
                                 {"r_avg", n ? ojson(sa / static_cast<double>(n)) : ojson(nullptr)},
                                 {"r_max", n ? ojson(sm / static_cast<double>(n)) : ojson(nullptr)},
                                 {"inputs", n}});
        }
        greedy.push_back(ojson{{"backend", backend}, {"generator", gen}, {"unit", "rationale"}, {"cells", std::move(gcells)}});
      }
    }
  }
  ojson report;
  report["header"] = header;
  report["kind"] = "coverage_budget";
  report["rows"] = std::move(rows);
  if (args.greedy) report["greedy"] = std::move(greedy);

  CommandResult out;
  out.files.add(config.out_dir / "coverage_budget.csv", table.str(&header));
  out.files.add(config.out_dir / "coverage_budget.json", dump(report));
  out.files.merge(export_plot_data(report, config.out_dir / "plots"));
  out.summary = text.str();
  out.report = std::move(report);
  return out;
}

CommandResult run_metrics(const RunConfig& config, const MetricsArgs& args) {
  for (const auto& k : args.group_by) {
    if (k != "model_id" && k != "setup_id") throw ValidationError("--group-by accepts model_id and setup_id, got '" + k + "'");
  }
  const auto records = load_predictions(args.predictions);
  if (records.empty()) throw ValidationError("no prediction records in '" + path_text(args.predictions) + "'");
  std::map<std::vector<std::string>, std::vector<PredictionRecord>> groups;
  for (const auto& r : records) {
    std::vector<std::string> key;
    for (const auto& k : args.group_by) key.push_back(k == "model_id" ? r.model_id : r.setup_id);
    groups[key].push_back(r);
  }
  const ojson header = report_header("metrics", config, {{"predictions", path_text(args.predictions)}});
  std::vector<std::string> cols = args.group_by;
  for (const char* c : {"n", "tp", "fp", "tn", "fn", "balanced_accuracy", "precision", "recall", "specificity", "f1"}) {
    cols.emplace_back(c);
  }
  CsvTable table(cols);
  ojson rows = ojson::array();
  std::ostringstream text;
  for (const auto& [key, recs] : groups) {
    const ClassificationMetrics m = classification_metrics(recs);
    std::vector<std::string> cells = key;
    const auto& cf = m.confusion;
    for (std::size_t v : {cf.total(), cf.tp, cf.fp, cf.tn, cf.fn}) cells.push_back(std::to_string(v));
    for (const Ratio* r : {&m.balanced_accuracy, &m.precision, &m.recall, &m.specificity, &m.f1}) {
      cells.push_back(format_optional(r->value));
    }
    table.add_row(std::move(cells));
    ojson row;
    for (std::size_t i = 0; i < key.size(); ++i) row[args.group_by[i]] = key[i];
    row["n"] = cf.total();
    row["confusion"] = ojson{{"tp", cf.tp}, {"fp", cf.fp}, {"tn", cf.tn}, {"fn", cf.fn}};
    row["balanced_accuracy"] = json_ratio(m.balanced_accuracy);
    row["precision"] = json_ratio(m.precision);
    row["recall"] = json_ratio(m.recall);
    row["specificity"] = json_ratio(m.specificity);
    row["f1"] = json_ratio(m.f1);
    rows.push_back(std::move(row));
    std::string name;
    for (const auto& k : key) name += (name.empty() ? "" : "/") + (k.empty() ? std::string("-") : k);
    text << (name.empty() ? "all" : name) << ": balanced accuracy " << format_optional(m.balanced_accuracy.value)
         << ", F1 " << format_optional(m.f1.value) << "\n";
  }
  ojson report;
  report["header"] = header;
  report["kind"] = "metrics";
  report["group_by"] = args.group_by;
  report["rows"] = std::move(rows);

  CommandResult out;
  out.files.add(config.out_dir / "metrics.csv", table.str(&header));
  out.files.add(config.out_dir / "metrics.json", dump(report));
  out.summary = text.str();
  out.report = std::move(report);
  return out;
}

CommandResult run_agreement(const RunConfig& config, const AgreementArgs& args) {
  if (args.method != "fleiss" && args.method != "cohen") {
    throw ValidationError("--method must be fleiss or cohen, got '" + args.method + "'");
  }
  const auto records = load_judgments(args.judgments);
  if (records.empty()) throw ValidationError("no judgment records in '" + path_text(args.judgments) + "'");
  using ItemKey = std::tuple<std::string, std::string, std::string>;  // item, model, setup

  ojson results = ojson::array();
  std::ostringstream text;
  for (FaithMetric metric : {FaithMetric::Consistency, FaithMetric::Groundedness}) {
    // item -> rater -> value
    std::map<ItemKey, std::map<std::string, int>> items;
    for (const auto& r : records) {
      if (r.metric != metric) continue;
      auto& slot = items[{r.item_id, r.model_id, r.setup_id}];
      if (!slot.emplace(r.rater_id, r.value).second) {
        throw ValidationError("agreement: rater '" + r.rater_id + "' judged item '" + r.item_id + "' twice for " +
                              std::string(to_string(metric)));
      }
    }
    if (items.empty()) continue;
    ojson res;
    res["metric"] = std::string(to_string(metric));
    res["method"] = args.method;
    res["items"] = items.size();
    if (args.method == "fleiss") {
      Eigen::MatrixXi counts(static_cast<Index>(items.size()), 2);
      Index i = 0;
      for (const auto& [key, raters] : items) {
        int ones = 0;
        for (const auto& [rater, v] : raters) ones += v;
        counts(i, 0) = static_cast<int>(raters.size()) - ones;
        counts(i, 1) = ones;
        ++i;
      }
      const int n = counts.row(0).sum();
      for (Index r = 0; r < counts.rows(); ++r) {
        if (counts.row(r).sum() != n) {
          auto it = std::next(items.begin(), r);
          throw ValidationError("fleiss: item '" + std::get<0>(it->first) + "' (model '" + std::get<1>(it->first) +
                                "') has " + std::to_string(counts.row(r).sum()) + " ratings, expected " +
                                std::to_string(n));
        }
      }
      const AgreementResult a = fleiss_kappa(counts);
      res["raters_per_item"] = n;
      res["kappa"] = a.kappa;
      res["observed_agreement"] = a.observed_agreement;
      res["expected_agreement"] = a.expected_agreement;
      text << to_string(metric) << ": Fleiss kappa " << format_real(a.kappa) << " over " << items.size() << " items\n";
    } else {
      std::vector<std::string> raters = args.raters;
      if (raters.empty()) {
        std::set<std::string> all;
        for (const auto& [key, rs] : items) {
          for (const auto& [r, v] : rs) all.insert(r);
        }
        if (all.size() != 2) {
          throw ValidationError("cohen: expected exactly two raters, found " + std::to_string(all.size()) +
                                "; pass --raters a,b");
        }
        raters.assign(all.begin(), all.end());
      }
      if (raters.size() != 2 || raters[0] == raters[1]) throw ValidationError("cohen: --raters needs two distinct ids");
      std::vector<int> a, b;
      for (const auto& [key, rs] : items) {
        auto ia = rs.find(raters[0]);
        auto ib = rs.find(raters[1]);
        if (ia == rs.end() || ib == rs.end()) continue;
        a.push_back(ia->second);
        b.push_back(ib->second);
      }
      if (a.empty()) throw ValidationError("cohen: raters share no items for " + std::string(to_string(metric)));
      const AgreementResult k = cohen_kappa(a, b);
      const ClassificationMetrics cm = classification_metrics(b, a);
      res["raters"] = raters;
      res["common_items"] = a.size();
      res["kappa"] = k.kappa;
      res["observed_agreement"] = k.observed_agreement;
      res["expected_agreement"] = k.expected_agreement;
      res["balanced_accuracy"] = json_ratio(cm.balanced_accuracy);
      res["f1"] = json_ratio(cm.f1);
      text << to_string(metric) << ": Cohen kappa " << format_real(k.kappa) << " over " << a.size() << " items\n";
    }
    results.push_back(std::move(res));
  }
  ojson report;
  report["header"] = report_header("agreement", config, {{"judgments", path_text(args.judgments)}});
  report["kind"] = "agreement";
  report["results"] = std::move(results);

  CommandResult out;
  out.files.add(config.out_dir / "agreement.json", dump(report));
  out.summary = text.str();
  out.report = std::move(report);
  return out;
}

CommandResult run_faithfulness(const RunConfig& config, const FaithfulnessArgs& args) {
  if (args.judgments.empty() && args.predictions.empty()) {
    throw ValidationError("faithfulness needs --judgments and/or --predictions");
  }
  std::vector<JudgmentRecord> judgments;
  std::vector<PredictionRecord> predictions;
  std::vector<std::pair<std::string, std::string>> inputs;
  if (!args.judgments.empty()) {
    judgments = load_judgments(args.judgments);
    inputs.emplace_back("judgments", path_text(args.judgments));
  }
  if (!args.predictions.empty()) {
    predictions = load_predictions(args.predictions);
    inputs.emplace_back("predictions", path_text(args.predictions));
  }
  const FaithfulnessTable table = faithfulness_table(judgments, predictions);
  const ojson header = report_header("faithfulness", config, inputs);

  ojson rows = ojson::array();
  std::ostringstream text;
  for (const auto& [model, setup] : table.rows()) {
    ojson row;
    row["model_id"] = model;
    row["setup_id"] = setup;
    text << model_key(model, setup) << ":";
    for (FaithColumn c : kColumns) {
      const FaithfulnessCell* cell = table.find(model, setup, c);
      const std::string name(to_string(c));
      row[name] = json_real(cell ? cell->mean : std::nullopt);
      row["n_" + name] = cell ? cell->count : 0;
      text << ' ' << name << ' ' << (cell && cell->mean ? format_real(*cell->mean) : std::string("-"));
    }
    text << "\n";
    rows.push_back(std::move(row));
  }
  ojson report;
  report["header"] = header;
  report["kind"] = "faithfulness";
  report["rows"] = std::move(rows);
  report["skipped_predictions"] = table.skipped_predictions;

  CommandResult out;
  out.files.add(args.out.value_or(config.out_dir / "faithfulness.csv"), faithfulness_csv(table, header));
  out.files.add(config.out_dir / "faithfulness.json", dump(report));
  out.summary = text.str();
  out.report = std::move(report);
  return out;
}

CommandResult run_align(const RunConfig& config, const AlignArgs& args) {
  const auto prefs = load_preferences(args.preferences);
  if (prefs.empty()) throw ValidationError("no preference records in '" + path_text(args.preferences) + "'");
  const MetricMaps maps = metric_maps_from_csv(args.faithfulness);
  std::optional<std::map<std::string, std::string>> family;
  std::vector<std::pair<std::string, std::string>> inputs{{"preferences", path_text(args.preferences)},
                                                          {"faithfulness", path_text(args.faithfulness)}};
  if (args.family_map) {
    family = load_family_map(*args.family_map);
    inputs.emplace_back("family_map", path_text(*args.family_map));
  }
  return align_impl(config, prefs, maps, family, args.majority, report_header("align", config, inputs));
}

CommandResult run_theory_check(const RunConfig& config, const TheoryArgs& args) {
  const std::string& which = args.which;
  if (which != "coverage" && which != "ridge" && which != "variance" && which != "all") {
    throw ValidationError("--which must be coverage, ridge, variance or all, got '" + which + "'");
  }
  const bool all = which == "all";
  ojson checks = ojson::array();
  bool ok = true;
  std::ostringstream text;
  auto record = [&](ojson check, bool holds, const std::string& line) {
    check["holds"] = holds;
    ok = ok && holds;
    checks.push_back(std::move(check));
    text << (holds ? "ok    " : "FAIL  ") << line << "\n";
  };

  if (all || which == "coverage") {
    // A worked instance: pool on a line, selection at the ends.
    EmbeddingMatrixd pool(4, 1);
    pool << 0.0, 1.0, 2.0, 4.0;
    const std::vector<Index> sel{0, 3};
    LipschitzLoss loss{2.0, VectorXd::Constant(1, 1.0), 0.5};
    const CoverageBoundCheck ex = check_coverage_bound(pool, std::span<const Index>(sel), loss);
    record(ojson{{"name", "coverage_bound_example"}, {"lhs", ex.lhs}, {"rhs", ex.rhs}, {"radius", ex.radius},
                 {"slack", ex.slack}},
           ex.holds, "coverage bound, worked instance: slack " + format_real(ex.slack));

    const std::size_t draws = args.trials.value_or(kCoverageDraws);
    const CoverageSweep sw = coverage_bound_sweep(draws, stream_seed(config.seed, 1), config.threads);
    record(ojson{{"name", "coverage_bound_sweep"}, {"trials", sw.trials}, {"violations", sw.violations},
                 {"min_slack", sw.min_slack}, {"tolerance", kBoundTolerance}},
           sw.violations == 0,
           "coverage bound sweep: " + std::to_string(sw.violations) + " violations in " + std::to_string(sw.trials));
  }
  if (all || which == "ridge") {
    RidgeProblem prob;
    prob.design = MatrixXd::Identity(2, 2);
    prob.lambda = 1.0;
    prob.sigma = 1.0;
    prob.theta_star = VectorXd::Zero(2);
    const std::size_t trials = args.trials.value_or(kRidgeTrials);
    const RidgeCheck rc = check_ridge_bounds(prob, trials, stream_seed(config.seed, 2), config.threads);
    record(ojson{{"name", "ridge_identity"}, {"variance_term", rc.variance_term}, {"variance_bound", rc.variance_bound},
                 {"bias_term", rc.bias_term}, {"bias_bound", rc.bias_bound}, {"trials", rc.trials},
                 {"mc_mse", rc.mc_mse}, {"mc_se", rc.mc_se}, {"expected_mse", rc.variance_term + rc.bias_term},
                 {"within_3se", std::abs(rc.mc_mse - rc.variance_term - rc.bias_term) <= 3.0 * rc.mc_se}},
           rc.holds && std::abs(rc.mc_mse - rc.variance_term - rc.bias_term) <= 3.0 * rc.mc_se,
           "ridge, H = I2: MC MSE " + format_real(rc.mc_mse) + " +- " + format_real(rc.mc_se) + " vs " +
               format_real(rc.variance_term + rc.bias_term));

    const RidgeSweep sw = ridge_bound_sweep(kRidgeInstances, stream_seed(config.seed, 3));
    record(ojson{{"name", "ridge_variance_sweep"}, {"instances", sw.instances}, {"violations", sw.violations},
                 {"max_ratio", sw.max_ratio}},
           sw.violations == 0,
           "ridge variance bound sweep: " + std::to_string(sw.violations) + " violations in " +
               std::to_string(sw.instances));
  }
  if (all || which == "variance") {
    const std::size_t trials = args.trials.value_or(kVarianceTrials);
    std::uint64_t idx = 0;
    struct Case {
      std::size_t m;
      double rho;
    };
    const Case grid[] = {{4, 0.0}, {4, 0.5}, {4, 1.0}, {8, 0.0}, {8, 0.5}, {8, 1.0}, {4, -0.2}};
    for (const auto& c : grid) {
      CorrelatedNoiseSpec spec;
      spec.sigma = 1.0;
      spec.m = c.m;
      spec.rho_bar = c.rho;
      const VarianceCheck v = check_variance_reduction(spec, trials, stream_seed(config.seed, 4, idx++), config.threads);
      record(ojson{{"name", "variance_reduction"}, {"m", c.m}, {"rho_bar", c.rho}, {"sigma", spec.sigma},
                   {"trials", v.trials}, {"analytic_var", v.analytic_var}, {"mc_var", v.mc_var},
                   {"rel_diff", v.rel_diff}, {"tolerance", v.tolerance}},
             v.holds,
             "variance, m " + std::to_string(c.m) + " rho " + format_real(c.rho) + ": MC " + format_real(v.mc_var) +
                 " vs " + format_real(v.analytic_var));
    }
  }

  ojson report;
  report["header"] = report_header("theory-check", config, {});
  report["kind"] = "theory_check";
  report["which"] = which;
  report["all_hold"] = ok;
  report["checks"] = std::move(checks);

  CommandResult out;
  out.files.add(config.out_dir / "theory_check.json", dump(report));
  out.summary = text.str();
  out.checks_passed = ok;
  out.report = std::move(report);
  return out;
}

CommandResult run_report(const RunConfig& config, const ReportArgs& args) {
  CommandResult out;
  ojson index;
  ojson sections = ojson::array();
  std::vector<std::pair<std::string, std::string>> inputs;
  auto take = [&](const std::string& name, CommandResult r) {
    sections.push_back(name);
    out.summary += "[" + name + "]\n" + r.summary;
    out.checks_passed = out.checks_passed && r.checks_passed;
    out.files.merge(std::move(r.files));
  };

  if (args.annotations) {
    inputs.emplace_back("annotations", path_text(*args.annotations));
    take("reconstruct", run_reconstruct(config, *args.annotations));
  }
  if (args.rationales) {
    inputs.emplace_back("rationales", path_text(*args.rationales));
    DiversityArgs d;
    d.rationales = *args.rationales;
    d.backends = args.backends;
    take("diversity", run_diversity(config, d));
    take("permanova", run_permanova(config, PermanovaArgs{*args.rationales, args.backends, {}}));
    take("coverage-budget", run_coverage_budget(config, BudgetArgs{*args.rationales, args.backends, {}, true}));
  }
  if (args.predictions) {
    inputs.emplace_back("predictions", path_text(*args.predictions));
    take("metrics", run_metrics(config, MetricsArgs{*args.predictions}));
  }
  if (args.judgments) {
    inputs.emplace_back("judgments", path_text(*args.judgments));
    take("agreement", run_agreement(config, AgreementArgs{*args.judgments}));
  }
  if (args.judgments || args.predictions) {
    FaithfulnessArgs f;
    if (args.judgments) f.judgments = *args.judgments;
    if (args.predictions) f.predictions = *args.predictions;
    CommandResult fr = run_faithfulness(config, f);
    if (args.preferences) {
      inputs.emplace_back("preferences", path_text(*args.preferences));
      std::vector<JudgmentRecord> judgments;
      std::vector<PredictionRecord> predictions;
      if (args.judgments) judgments = load_judgments(*args.judgments);
      if (args.predictions) predictions = load_predictions(*args.predictions);
      std::optional<std::map<std::string, std::string>> family;
      std::vector<std::pair<std::string, std::string>> ain{{"preferences", path_text(*args.preferences)},
                                                           {"faithfulness", "faithfulness.csv"}};
      if (args.family_map) {
        family = load_family_map(*args.family_map);
        ain.emplace_back("family_map", path_text(*args.family_map));
        inputs.emplace_back("family_map", path_text(*args.family_map));
      }
      take("faithfulness", std::move(fr));
      take("align", align_impl(config, load_preferences(*args.preferences),
                               metric_maps_from_table(faithfulness_table(judgments, predictions)), family, false,
                               report_header("align", config, ain)));
    } else {
      take("faithfulness", std::move(fr));
    }
  }
  if (args.theory) take("theory-check", run_theory_check(config, TheoryArgs{}));
  if (sections.empty()) throw ValidationError("report: no inputs given");

  index["header"] = report_header("report", config, inputs);
  index["kind"] = "report";
  index["sections"] = std::move(sections);
  ojson files = ojson::array();
  for (const auto& [path, contents] : out.files.files()) files.push_back(path.lexically_relative(config.out_dir).generic_string());
  index["files"] = std::move(files);
  index["all_checks_hold"] = out.checks_passed;
  out.files.add(config.out_dir / "report.json", dump(index));
  out.report = std::move(index);
  return out;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

SourceSubset parse_subset(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--subset expects name=source,source,..., got '" + text + "'");
  SourceSubset s{text.substr(0, eq), split_list(text.substr(eq + 1))};
  if (s.sources.empty()) throw ValidationError("--subset '" + s.name + "' lists no sources");
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rationale diversity, faithfulness and agreement analysis toolkit", std::string(kToolName)};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1, 1);

  std::string config_path, out_dir, budgets, quartile;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double alpha = 0, tau = 0, test_fraction = 0, balance_tol = 0;
  std::size_t permutations = 0, corr_permutations = 0, draws = 0, min_votes = 0;
  bool normalize = false, raw = false;

  auto* o_config = app.add_option("--config", config_path, "key = value configuration file");
  auto* o_seed = app.add_option("--seed", seed, "random seed");
  auto* o_threads = app.add_option("--threads", threads, "worker threads (results do not depend on it)");
  auto* o_out = app.add_option("--out-dir", out_dir, "output directory (default $RATKIT_OUT_DIR or .)");
  auto* o_alpha = app.add_option("--alpha", alpha, "logdet scale");
  auto* o_tau = app.add_option("--tau", tau, "near-duplicate cosine threshold");
  auto* o_perm = app.add_option("--permutations", permutations, "PERMANOVA permutations");
  auto* o_cperm = app.add_option("--correlation-permutations", corr_permutations, "permutations for correlation p-values");
  auto* o_draws = app.add_option("--draws", draws, "random draws per input in the budget sweep");
  auto* o_budgets = app.add_option("--budgets", budgets, "comma-separated budgets, e.g. 1,2,3,4,5");
  auto* o_quart = app.add_option("--quartile-method", quartile, "linear | exclusive | nearest");
  auto* o_votes = app.add_option("--min-votes", min_votes, "minimum binary votes to label a pair");
  auto* o_frac = app.add_option("--test-fraction", test_fraction, "target test share of pairs");
  auto* o_tol = app.add_option("--balance-tol", balance_tol, "allowed positive-rate gap between splits");
  auto* o_norm = app.add_flag("--normalize", normalize, "L2-normalize embeddings first");
  auto* o_raw = app.add_flag("--raw", raw, "use embeddings as given (default)");
  o_norm->excludes(o_raw);

  std::string annotations, rationales, predictions, judgments, preferences, faith_csv, family_map;
  std::string per_input, summary, out_path, generator, method = "fleiss", raters, which = "all", group_by;
  std::vector<std::string> backends, subsets;
  std::size_t trials = 0;
  bool greedy = false, majority = false, no_theory = false;

  auto* c_rec = app.add_subcommand("reconstruct", "binary labels from raw persuasiveness scores, plus a split");
  c_rec->add_option("annotations", annotations, "annotation JSONL")->required();

  auto* c_div = app.add_subcommand("diversity", "per-input diversity proxies");
  c_div->add_option("--rationales", rationales, "rationale JSONL")->required();
  c_div->add_option("--backend", backends, "embedding backend (repeatable; default all)");
  c_div->add_option("--generator", generator, "restrict to one generator");
  c_div->add_option("--subset", subsets, "named source subset name=a,b,... (repeatable)");
  c_div->add_option("--per-input", per_input, "per-input CSV path");
  c_div->add_option("--summary", summary, "summary JSON path");

  auto* c_perm = app.add_subcommand("permanova", "source effect on input-centered embeddings");
  c_perm->add_option("--rationales", rationales, "rationale JSONL")->required();
  c_perm->add_option("--backend", backends, "embedding backend (repeatable; default all)");
  c_perm->add_option("--generator", generator, "restrict to one generator");

  auto* c_bud = app.add_subcommand("coverage-budget", "random source-budget coverage baseline");
  c_bud->add_option("--rationales", rationales, "rationale JSONL")->required();
  c_bud->add_option("--backend", backends, "embedding backend (repeatable; default all)");
  c_bud->add_option("--generator", generator, "restrict to one generator");
  c_bud->add_flag("--greedy", greedy, "add a farthest-point selection comparison");

  auto* c_met = app.add_subcommand("metrics", "classification metrics per model and setup");
  c_met->add_option("--predictions", predictions, "prediction JSONL")->required();
  c_met->add_option("--group-by", group_by, "comma-separated keys (model_id,setup_id)");

  auto* c_agr = app.add_subcommand("agreement", "inter-rater agreement on judgments");
  c_agr->add_option("--judgments", judgments, "judgment JSONL")->required();
  c_agr->add_option("--method", method, "fleiss | cohen");
  c_agr->add_option("--raters", raters, "cohen: reference,other");

  auto* c_fai = app.add_subcommand("faithfulness", "consistency, groundedness and sensitivity table");
  c_fai->add_option("--judgments", judgments, "judgment JSONL");
  c_fai->add_option("--predictions", predictions, "prediction JSONL");
  c_fai->add_option("--out", out_path, "table CSV path");

  auto* c_ali = app.add_subcommand("align", "faithfulness metrics against pairwise preferences");
  c_ali->add_option("--preferences", preferences, "preference JSONL")->required();
  c_ali->add_option("--faithfulness", faith_csv, "faithfulness table CSV")->required();
  c_ali->add_option("--family-map", family_map, "model,family CSV");
  c_ali->add_flag("--majority", majority, "use per-pair majority instead of raw rates");

  auto* c_the = app.add_subcommand("theory-check", "numerical checks of the bounds");
  c_the->add_option("--which", which, "coverage | ridge | variance | all");
  c_the->add_option("--trials", trials, "Monte Carlo trials for every selected check");

  auto* c_rep = app.add_subcommand("report", "run every analysis the given inputs allow");
  c_rep->add_option("--annotations", annotations, "annotation JSONL");
  c_rep->add_option("--rationales", rationales, "rationale JSONL");
  c_rep->add_option("--predictions", predictions, "prediction JSONL");
  c_rep->add_option("--judgments", judgments, "judgment JSONL");
  c_rep->add_option("--preferences", preferences, "preference JSONL");
  c_rep->add_option("--family-map", family_map, "model,family CSV");
  c_rep->add_option("--backend", backends, "embedding backend (repeatable; default all)");
  c_rep->add_flag("--no-theory", no_theory, "skip the theory checks");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config;
    if (*o_config) config = load_config(config_path);
    if (const char* env = std::getenv("RATKIT_OUT_DIR"); env && *env) config.out_dir = env;
    if (*o_out) config.out_dir = out_dir;
    if (*o_seed) config.seed = seed;
    if (*o_threads) config.threads = threads;
    if (*o_alpha) config.alpha = alpha;
    if (*o_tau) config.tau = tau;
    if (*o_perm) config.permutations = permutations;
    if (*o_cperm) config.correlation_permutations = corr_permutations;
    if (*o_draws) config.draws = draws;
    if (*o_budgets) config.budgets = parse_count_list(budgets);
    if (*o_quart) config.quartile_method = parse_quartile_method(quartile);
    if (*o_votes) config.min_votes = min_votes;
    if (*o_frac) config.test_fraction = test_fraction;
    if (*o_tol) config.balance_tol = balance_tol;
    if (*o_norm) config.normalize = true;
    if (*o_raw) config.normalize = false;
    config.validate();

    auto opt_path = [](const std::string& s) { return s.empty() ? std::optional<fs::path>() : std::optional<fs::path>(s); };

    CommandResult result;
    if (*c_rec) {
      result = run_reconstruct(config, annotations);
    } else if (*c_div) {
      DiversityArgs a;
      a.rationales = rationales;
      a.backends = backends;
      a.generator = generator;
      for (const auto& s : subsets) a.subsets.push_back(parse_subset(s));
      a.per_input = opt_path(per_input);
      a.summary = opt_path(summary);
      result = run_diversity(config, a);
    } else if (*c_perm) {
      result = run_permanova(config, PermanovaArgs{rationales, backends, generator});
    } else if (*c_bud) {
      result = run_coverage_budget(config, BudgetArgs{rationales, backends, generator, greedy});
    } else if (*c_met) {
      MetricsArgs a;
      a.predictions = predictions;
      if (!group_by.empty()) a.group_by = split_list(group_by);
      result = run_metrics(config, a);
    } else if (*c_agr) {
      result = run_agreement(config, AgreementArgs{judgments, method, split_list(raters)});
    } else if (*c_fai) {
      result = run_faithfulness(config, FaithfulnessArgs{judgments, predictions, opt_path(out_path)});
    } else if (*c_ali) {
      result = run_align(config, AlignArgs{preferences, faith_csv, opt_path(family_map), majority});
    } else if (*c_the) {
      TheoryArgs a;
      a.which = which;
      if (c_the->count("--trials")) a.trials = trials;
      result = run_theory_check(config, a);
    } else if (*c_rep) {
      ReportArgs a;
      a.annotations = opt_path(annotations);
      a.rationales = opt_path(rationales);
      a.predictions = opt_path(predictions);
      a.judgments = opt_path(judgments);
      a.preferences = opt_path(preferences);
      a.family_map = opt_path(family_map);
      a.backends = backends;
      a.theory = !no_theory;
      result = run_report(config, a);
    }
    result.files.write_all();
    out << result.summary;
    if (!result.checks_passed) {
      err << "ratkit: one or more checks failed\n";
      return 1;
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "ratkit: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateDataError& e) {
    err << "ratkit: degenerate data: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ratkit
