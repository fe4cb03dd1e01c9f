#pragma once

#include "ratkit/records.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ratkit {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

/// A ratio that may be undefined; `reason` says why when `value` is empty.
struct Ratio {
  std::optional<double> value;
  std::string reason;

  static Ratio of(double num, double den, std::string_view why_undefined);
};

struct ClassificationMetrics {
  ConfusionCounts confusion;
  Ratio balanced_accuracy;
  Ratio precision;
  Ratio recall;
  Ratio specificity;
  Ratio f1;
};

/// Positive class is label 1.
ClassificationMetrics classification_metrics(std::span<const int> predicted, std::span<const int> gold);
ClassificationMetrics classification_metrics(const std::vector<PredictionRecord>& records);

struct AgreementResult {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
};

/// Fleiss' kappa. `counts(i, j)` is how many raters put item i in category j; every row must
/// sum to the same rater count n >= 2.
AgreementResult fleiss_kappa(const Eigen::MatrixXi& counts);

/// Cohen's kappa for two binary raters.
AgreementResult cohen_kappa(std::span<const int> a, std::span<const int> b);

/// Whitespace-delimited token count.
std::size_t count_tokens(std::string_view text);

struct LengthStats {
  double avg_tokens = 0.0;
  std::vector<std::size_t> per_text;
};

LengthStats length_stats(std::span<const std::string> texts);

struct LengthGroup {
  double avg_tokens = 0.0;
  std::size_t texts = 0;
  std::size_t missing = 0;  // records without text
};

/// Mean rationale length per source id.
std::map<std::string, LengthGroup> length_by_source(const std::vector<RationaleRecord>& records);

}  // namespace ratkit
