#pragma once

#include "ratkit/core.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ratkit {

struct AnnotationRecord {
  std::string pair_id;
  std::string message_id;
  std::string annotator_id;
  double score = 0.0;  // raw persuasiveness, [0, 10]
};

struct AnnotatorProfile {
  std::string annotator_id;
  double q1 = 0.0;
  double q3 = 0.0;
  std::size_t n_scores = 0;
};

struct LabeledPair {
  std::string pair_id;
  std::string message_id;
  int label = 0;
  std::size_t persuasive_votes = 0;
  std::size_t unpersuasive_votes = 0;
};

struct RationaleRecord {
  std::string input_id;
  std::string source_id;
  std::string generator_id;
  int label = 0;
  std::optional<std::string> text;
  VectorXd embedding;
  std::string backend_id;
};

struct PredictionRecord {
  std::string input_id;
  std::string model_id;
  std::string setup_id;
  int pred = 0;
  int gold = 0;
  std::optional<double> logp_orig;
  std::optional<double> logp_edit;
};

enum class FaithMetric { Consistency, Groundedness };

struct JudgmentRecord {
  std::string item_id;
  std::string model_id;
  std::string setup_id;  // optional on disk; empty when absent
  FaithMetric metric = FaithMetric::Consistency;
  std::string rater_id;
  int value = 0;
};

enum class Winner { A, B };

struct PreferenceRecord {
  std::string item_id;
  std::string model_a;
  std::string model_b;
  std::string rater_id;
  Winner winner = Winner::A;
};

std::string_view to_string(FaithMetric m);
std::string_view to_string(Winner w);

enum class Schema { Annotations, Rationales, Predictions, Judgments, Preferences, LabeledPairs };

std::string_view to_string(Schema s);
Schema parse_schema(std::string_view name);

// Loading. Every loader validates per-record invariants and throws ValidationError naming
// the 1-based line and field. Blank lines are skipped but still counted.
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);
std::vector<RationaleRecord> load_rationales(const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
std::vector<JudgmentRecord> load_judgments(const std::filesystem::path& path);
std::vector<PreferenceRecord> load_preferences(const std::filesystem::path& path);
std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path);

// Same, from an in-memory line-delimited document.
std::vector<AnnotationRecord> parse_annotations(std::string_view text);
std::vector<RationaleRecord> parse_rationales(std::string_view text);
std::vector<PredictionRecord> parse_predictions(std::string_view text);
std::vector<JudgmentRecord> parse_judgments(std::string_view text);
std::vector<PreferenceRecord> parse_preferences(std::string_view text);
std::vector<LabeledPair> parse_labeled_pairs(std::string_view text);

// Canonical emission: fixed field order, shortest round-trip floats, one record per line.
std::string to_jsonl(const std::vector<AnnotationRecord>& records);
std::string to_jsonl(const std::vector<RationaleRecord>& records);
std::string to_jsonl(const std::vector<PredictionRecord>& records);
std::string to_jsonl(const std::vector<JudgmentRecord>& records);
std::string to_jsonl(const std::vector<PreferenceRecord>& records);
std::string to_jsonl(const std::vector<LabeledPair>& records);

/// Rewrites a record file of the given schema into canonical form (validating on the way).
std::string canonicalize(std::string_view text, Schema schema);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

struct GroupMember {
  std::string source_id;
  std::string generator_id;
  std::size_t record_index = 0;  // position in the loaded file, 0-based
};

/// Rationales of one input under one embedding backend. Row i of `embeddings` is members[i].
struct EmbeddingGroup {
  std::string input_id;
  std::string backend_id;
  std::vector<GroupMember> members;
  EmbeddingMatrixd embeddings;

  Index size() const { return embeddings.rows(); }
  Index dim() const { return embeddings.cols(); }

  /// Sorted distinct source ids among members (optionally of one generator).
  std::vector<std::string> sources(std::string_view generator = {}) const;
  /// Sub-group of members matching the predicate, order preserved.
  template <typename Pred>
  EmbeddingGroup filter(Pred&& keep) const {
    EmbeddingGroup out{input_id, backend_id, {}, {}};
    std::vector<Index> rows;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (keep(members[i])) {
        rows.push_back(static_cast<Index>(i));
        out.members.push_back(members[i]);
      }
    }
    out.embeddings = embeddings(rows, Eigen::all);
    return out;
  }
};

using GroupKey = std::pair<std::string, std::string>;  // (input_id, backend_id)
using GroupMap = std::map<GroupKey, EmbeddingGroup>;

/// Groups by (input_id, backend_id); members stably sorted by (source_id, arrival index).
GroupMap group_embeddings(const std::vector<RationaleRecord>& records);

/// Groups of one backend in input_id order.
std::vector<EmbeddingGroup> groups_for_backend(const GroupMap& groups, std::string_view backend);

}  // namespace ratkit
