#pragma once

#include "ratkit/permutation.hpp"
#include "ratkit/records.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ratkit {

struct SensitivityResult {
  double delta = 0.0;  // log P(y | original) - log P(y | edited)
  int score = 0;       // 1 iff delta > 0
};

SensitivityResult sensitivity(double logp_orig, double logp_edit);

enum class FaithColumn { Consistency, Groundedness, Sensitivity };

std::string_view to_string(FaithColumn c);

struct FaithfulnessCell {
  std::string model_id;
  std::string setup_id;
  FaithColumn metric = FaithColumn::Consistency;
  std::optional<double> mean;  // empty when no records
  std::size_t count = 0;
};

struct FaithfulnessTable {
  std::vector<FaithfulnessCell> cells;  // ordered by (model, setup, metric)
  std::size_t skipped_predictions = 0;  // no log-probability pair

  /// Cell lookup; nullptr if the (model, setup) row is absent.
  const FaithfulnessCell* find(std::string_view model, std::string_view setup, FaithColumn metric) const;
  std::vector<std::pair<std::string, std::string>> rows() const;
};

/// Mean binary score per (model, setup, metric). Consistency and groundedness come from
/// judgments; sensitivity from predictions carrying both log-probabilities.
FaithfulnessTable faithfulness_table(const std::vector<JudgmentRecord>& judgments,
                                     const std::vector<PredictionRecord>& predictions);

using ModelPair = std::pair<std::string, std::string>;  // lexicographically ordered

struct PairTally {
  std::size_t first_wins = 0;   // wins of pair.first
  std::size_t second_wins = 0;

  std::size_t total() const { return first_wins + second_wins; }
  /// Raw judgment fraction preferring pair.first.
  double first_rate() const { return static_cast<double>(first_wins) / static_cast<double>(total()); }
};

struct PreferenceSummary {
  std::vector<std::string> models;                 // sorted
  std::map<std::string, double> win_rate;
  std::map<std::string, std::size_t> judgments;    // per model
  std::map<ModelPair, PairTally> pairs;
  std::size_t total = 0;

  /// Fraction of (a, b) judgments won by a; empty when the pair never met.
  std::optional<double> rate(const std::string& a, const std::string& b) const;
};

PreferenceSummary preference_summary(const std::vector<PreferenceRecord>& prefs);

struct ScatterPoint {
  std::string pair_id;  // "A|B"
  double delta_metric = 0.0;
  double preference_rate = 0.0;
};

struct AlignmentResult {
  std::string metric;
  std::string scope;  // "all", "within:<family>", "cross"
  std::optional<double> pairwise_accuracy;
  std::size_t decided_pairs = 0;    // pairs entering the accuracy denominator
  std::size_t metric_ties = 0;
  std::size_t preference_ties = 0;
  std::optional<CorrelationResult> correlation;
  std::string correlation_note;     // why correlation is absent
  std::vector<ScatterPoint> points;
};

struct AlignmentOptions {
  bool majority = false;  // use per-pair majority (1 / 0.5 / 0) instead of the raw fraction
  std::size_t permutations = 9999;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Relates metric differences (A - B, A the lexicographically first model) to preference
/// for A over every model pair that met in `prefs`; each such model needs a metric value.
/// `pair_filter`, when set, keeps only pairs for which it returns true.
AlignmentResult metric_preference_alignment(const PreferenceSummary& prefs,
                                            const std::map<std::string, double>& metric,
                                            const AlignmentOptions& options, std::string metric_name = {},
                                            const std::function<bool(const ModelPair&)>& pair_filter = {});

/// Alignment per family scope: all pairs, each within-family group, and cross-family pairs.
std::vector<AlignmentResult> alignment_by_family(const PreferenceSummary& prefs,
                                                 const std::map<std::string, double>& metric,
                                                 const std::map<std::string, std::string>& family,
                                                 const AlignmentOptions& options, const std::string& metric_name);

}  // namespace ratkit
