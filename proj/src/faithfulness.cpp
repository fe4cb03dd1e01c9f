#include "ratkit/faithfulness.hpp"

#include <cmath>
#include <set>
#include <tuple>

namespace ratkit {

SensitivityResult sensitivity(double logp_orig, double logp_edit) {
  if (!std::isfinite(logp_orig) || !std::isfinite(logp_edit)) {
    throw ValidationError("sensitivity: log-probabilities must be finite");
  }
  if (logp_orig > 0.0 || logp_edit > 0.0) throw ValidationError("sensitivity: log-probabilities must be <= 0");
  SensitivityResult r;
  r.delta = logp_orig - logp_edit;
  r.score = r.delta > 0.0 ? 1 : 0;
  return r;
}

std::string_view to_string(FaithColumn c) {
  switch (c) {
    case FaithColumn::Consistency: return "consistency";
    case FaithColumn::Groundedness: return "groundedness";
    case FaithColumn::Sensitivity: return "sensitivity";
  }
  return "unknown";
}

const FaithfulnessCell* FaithfulnessTable::find(std::string_view model, std::string_view setup,
                                                FaithColumn metric) const {
  for (const auto& c : cells) {
    if (c.model_id == model && c.setup_id == setup && c.metric == metric) return &c;
  }
  return nullptr;
}

std::vector<std::pair<std::string, std::string>> FaithfulnessTable::rows() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& c : cells) {
    if (out.empty() || out.back() != std::pair{c.model_id, c.setup_id}) out.emplace_back(c.model_id, c.setup_id);
  }
  return out;
}

FaithfulnessTable faithfulness_table(const std::vector<JudgmentRecord>& judgments,
                                     const std::vector<PredictionRecord>& predictions) {
  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, std::pair<std::size_t, std::size_t>> tally;  // (ones, count)
  std::set<std::pair<std::string, std::string>> rows;
  for (const auto& j : judgments) {
    const int col = j.metric == FaithMetric::Consistency ? 0 : 1;
    auto& t = tally[{j.model_id, j.setup_id, col}];
    t.first += static_cast<std::size_t>(j.value);
    t.second += 1;
    rows.emplace(j.model_id, j.setup_id);
  }
  FaithfulnessTable table;
  for (const auto& p : predictions) {
    rows.emplace(p.model_id, p.setup_id);
    if (!p.logp_orig || !p.logp_edit) {
      ++table.skipped_predictions;
      continue;
    }
    auto& t = tally[{p.model_id, p.setup_id, 2}];
    t.first += static_cast<std::size_t>(sensitivity(*p.logp_orig, *p.logp_edit).score);
    t.second += 1;
  }
  for (const auto& [model, setup] : rows) {
    for (int col = 0; col < 3; ++col) {
      FaithfulnessCell cell{model, setup, static_cast<FaithColumn>(col), std::nullopt, 0};
      if (auto it = tally.find({model, setup, col}); it != tally.end()) {
        cell.count = it->second.second;
        cell.mean = static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

std::optional<double> PreferenceSummary::rate(const std::string& a, const std::string& b) const {
  const bool flipped = b < a;
  const auto it = pairs.find(flipped ? ModelPair{b, a} : ModelPair{a, b});
  if (it == pairs.end() || it->second.total() == 0) return std::nullopt;
  const double first = it->second.first_rate();
  return flipped ? 1.0 - first : first;
}

PreferenceSummary preference_summary(const std::vector<PreferenceRecord>& prefs) {
  PreferenceSummary s;
  std::map<std::string, std::size_t> wins;
  for (const auto& p : prefs) {
    const std::string& winner = p.winner == Winner::A ? p.model_a : p.model_b;
    const std::string& loser = p.winner == Winner::A ? p.model_b : p.model_a;
    ++wins[winner];
    wins.try_emplace(loser, 0);
    ++s.judgments[winner];
    ++s.judgments[loser];
    const bool ordered = p.model_a < p.model_b;
    auto& t = s.pairs[ordered ? ModelPair{p.model_a, p.model_b} : ModelPair{p.model_b, p.model_a}];
    (winner < loser ? t.first_wins : t.second_wins) += 1;
    ++s.total;
  }
  for (const auto& [model, w] : wins) {
    s.models.push_back(model);
    s.win_rate[model] = static_cast<double>(w) / static_cast<double>(s.judgments[model]);
  }
  return s;
}

AlignmentResult metric_preference_alignment(const PreferenceSummary& prefs, const std::map<std::string, double>& metric,
                                            const AlignmentOptions& options, std::string metric_name,
                                            const std::function<bool(const ModelPair&)>& pair_filter) {
  AlignmentResult out;
  out.metric = std::move(metric_name);
  out.scope = "all";
  std::size_t correct = 0;
  std::vector<double> deltas, rates;
  for (const auto& [pair, tally] : prefs.pairs) {
    if (pair_filter && !pair_filter(pair)) continue;
    const auto a = metric.find(pair.first);
    const auto b = metric.find(pair.second);
    if (a == metric.end() || b == metric.end()) {
      throw ValidationError("alignment: no metric value for model '" +
                            (a == metric.end() ? pair.first : pair.second) + "'");
    }
    const double delta = a->second - b->second;
    const double raw = tally.first_rate();
    const double rate = options.majority ? (raw > 0.5 ? 1.0 : raw < 0.5 ? 0.0 : 0.5) : raw;
    out.points.push_back({pair.first + "|" + pair.second, delta, rate});
    deltas.push_back(delta);
    rates.push_back(rate);

    if (delta == 0.0) {
      ++out.metric_ties;
    } else if (raw == 0.5) {
      ++out.preference_ties;
    } else {
      ++out.decided_pairs;
      correct += (delta > 0.0) == (raw > 0.5) ? 1 : 0;
    }
  }
  if (out.decided_pairs > 0) {
    out.pairwise_accuracy = static_cast<double>(correct) / static_cast<double>(out.decided_pairs);
  }
  try {
    out.correlation = correlate(deltas, rates, options.permutations, options.seed, options.threads);
  } catch (const ValidationError& e) {
    out.correlation_note = e.what();
  }
  return out;
}

std::vector<AlignmentResult> alignment_by_family(const PreferenceSummary& prefs,
                                                 const std::map<std::string, double>& metric,
                                                 const std::map<std::string, std::string>& family,
                                                 const AlignmentOptions& options, const std::string& metric_name) {
  std::vector<AlignmentResult> out;
  out.push_back(metric_preference_alignment(prefs, metric, options, metric_name));
  if (family.empty()) return out;

  auto family_of = [&](const std::string& m) -> const std::string* {
    auto it = family.find(m);
    return it == family.end() ? nullptr : &it->second;
  };
  std::set<std::string> families;
  for (const auto& [m, f] : family) families.insert(f);
  for (const auto& f : families) {
    auto within = [&](const ModelPair& p) {
      const auto* fa = family_of(p.first);
      const auto* fb = family_of(p.second);
      return fa && fb && *fa == f && *fb == f;
    };
    auto r = metric_preference_alignment(prefs, metric, options, metric_name, within);
    r.scope = "within:" + f;
    out.push_back(std::move(r));
  }
  auto cross = [&](const ModelPair& p) {
    const auto* fa = family_of(p.first);
    const auto* fb = family_of(p.second);
    return fa && fb && *fa != *fb;
  };
  auto r = metric_preference_alignment(prefs, metric, options, metric_name, cross);
  r.scope = "cross";
  out.push_back(std::move(r));
  return out;
}

}  // namespace ratkit
