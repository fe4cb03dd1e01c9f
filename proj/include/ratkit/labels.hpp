#pragma once

#include "ratkit/config.hpp"
#include "ratkit/records.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ratkit {

/// Quantile of a sample under the given convention. `values` need not be sorted.
double quantile(std::vector<double> values, double p, QuartileMethod method);

/// Per-annotator first/third quartiles, ordered by annotator id.
std::vector<AnnotatorProfile> annotator_profiles(const std::vector<AnnotationRecord>& records,
                                                 QuartileMethod method = QuartileMethod::Linear);

/// 1 above the annotator's Q3, 0 below Q1, no vote in [Q1, Q3].
std::optional<int> binary_vote(double score, const AnnotatorProfile& profile);

/// Supermajority aggregation: label when at least 75% of at least `min_votes` votes agree.
std::optional<int> aggregate_label(std::span<const int> votes, std::size_t min_votes = 2);

struct ReconstructionResult {
  std::vector<LabeledPair> pairs;           // retained, ordered by pair id
  std::vector<std::string> discarded;       // pair ids without a supermajority
  std::vector<AnnotatorProfile> profiles;
};

ReconstructionResult reconstruct_labels(const std::vector<AnnotationRecord>& records,
                                        QuartileMethod method = QuartileMethod::Linear,
                                        std::size_t min_votes = 2);

struct SplitResult {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> test;
  std::set<std::string> train_messages;
  std::set<std::string> test_messages;
  double positive_rate_gap = 0.0;  // |rate(train) - rate(test)|, 0 when a side is empty
  bool balanced = false;           // gap within tolerance and both sides populated
  std::size_t attempts = 0;
};

double positive_rate(const std::vector<LabeledPair>& pairs);

/// Message-disjoint split: seeded randomized first-fit over messages, retried until the
/// positive-rate gap is within `balance_tolerance` or `max_attempts` is spent. The best
/// split found is returned either way, with `balanced` reporting success.
SplitResult message_disjoint_split(const std::vector<LabeledPair>& pairs, double test_fraction,
                                   double balance_tolerance, std::uint64_t seed,
                                   std::size_t max_attempts = 1000);

}  // namespace ratkit
