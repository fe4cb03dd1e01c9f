#include "ratkit/records.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace ratkit {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(std::size_t line, std::string_view field, std::string_view what) {
  std::ostringstream msg;
  msg << "line " << line;
  if (!field.empty()) msg << ", field '" << field << "'";
  msg << ": " << what;
  throw ValidationError(msg.str());
}

// One parsed line plus its 1-based line number, for error reporting.
struct Line {
  json value;
  std::size_t number;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view raw = text.substr(pos, end - pos);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    const bool blank = std::all_of(raw.begin(), raw.end(), [](char c) {
      return c == ' ' || c == '\t';
    });
    if (!blank) {
      json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
      if (value.is_discarded()) fail(number, {}, "malformed JSON");
      if (!value.is_object()) fail(number, {}, "record must be a JSON object");
      out.push_back({std::move(value), number});
    }
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

const json& field(const Line& l, const char* name) {
  auto it = l.value.find(name);
  if (it == l.value.end()) fail(l.number, name, "missing");
  return *it;
}

std::string get_string(const Line& l, const char* name) {
  const json& v = field(l, name);
  if (!v.is_string()) fail(l.number, name, "expected string");
  return v.get<std::string>();
}

std::string get_string_or(const Line& l, const char* name, std::string fallback) {
  if (!l.value.contains(name)) return fallback;
  return get_string(l, name);
}

double get_real(const Line& l, const char* name) {
  const json& v = field(l, name);
  if (!v.is_number()) fail(l.number, name, "expected number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(l.number, name, "must be finite");
  return x;
}

std::optional<double> get_optional_real(const Line& l, const char* name) {
  auto it = l.value.find(name);
  if (it == l.value.end() || it->is_null()) return std::nullopt;
  return get_real(l, name);
}

int get_binary(const Line& l, const char* name) {
  const json& v = field(l, name);
  if (!v.is_number_integer()) fail(l.number, name, "expected integer 0 or 1");
  const auto x = v.get<long long>();
  if (x != 0 && x != 1) fail(l.number, name, "must be 0 or 1");
  return static_cast<int>(x);
}

std::size_t get_count(const Line& l, const char* name) {
  const json& v = field(l, name);
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(l.number, name, "expected non-negative integer");
  return v.get<std::size_t>();
}

std::string dump_lines(const std::vector<ordered_json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

}  // namespace

std::string_view to_string(FaithMetric m) {
  return m == FaithMetric::Consistency ? "consistency" : "groundedness";
}

std::string_view to_string(Winner w) { return w == Winner::A ? "A" : "B"; }

std::string_view to_string(Schema s) {
  switch (s) {
    case Schema::Annotations: return "annotations";
    case Schema::Rationales: return "rationales";
    case Schema::Predictions: return "predictions";
    case Schema::Judgments: return "judgments";
    case Schema::Preferences: return "preferences";
    case Schema::LabeledPairs: return "labeled_pairs";
  }
  return "unknown";
}

Schema parse_schema(std::string_view name) {
  for (Schema s : {Schema::Annotations, Schema::Rationales, Schema::Predictions, Schema::Judgments,
                   Schema::Preferences, Schema::LabeledPairs}) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown record schema '" + std::string(name) + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open input file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open output file '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Parsing

std::vector<AnnotationRecord> parse_annotations(std::string_view text) {
  std::vector<AnnotationRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const Line& l : split_lines(text)) {
    AnnotationRecord r{get_string(l, "pair_id"), get_string(l, "message_id"),
                       get_string(l, "annotator_id"), get_real(l, "score")};
    if (r.score < 0.0 || r.score > 10.0) fail(l.number, "score", "out of range [0, 10]");
    if (!seen.emplace(r.pair_id, r.annotator_id).second) {
      fail(l.number, "annotator_id",
           "duplicate (pair_id, annotator_id) = (" + r.pair_id + ", " + r.annotator_id + ")");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RationaleRecord> parse_rationales(std::string_view text) {
  std::vector<RationaleRecord> out;
  std::map<std::string, Index> dims;
  for (const Line& l : split_lines(text)) {
    RationaleRecord r;
    r.input_id = get_string(l, "input_id");
    r.source_id = get_string(l, "source_id");
    r.generator_id = get_string_or(l, "generator_id", "");
    r.label = get_binary(l, "label");
    if (l.value.contains("text") && !l.value["text"].is_null()) r.text = get_string(l, "text");
    r.backend_id = get_string(l, "backend_id");
    const json& emb = field(l, "embedding");
    if (!emb.is_array() || emb.empty()) fail(l.number, "embedding", "expected non-empty array");
    r.embedding.resize(static_cast<Index>(emb.size()));
    for (std::size_t i = 0; i < emb.size(); ++i) {
      if (!emb[i].is_number()) fail(l.number, "embedding", "non-numeric component");
      const double x = emb[i].get<double>();
      if (!std::isfinite(x)) fail(l.number, "embedding", "non-finite component");
      r.embedding[static_cast<Index>(i)] = x;
    }
    auto [it, inserted] = dims.emplace(r.backend_id, r.embedding.size());
    if (!inserted && it->second != r.embedding.size()) {
      fail(l.number, "embedding",
           "dimension mismatch under backend '" + r.backend_id + "': " +
               std::to_string(r.embedding.size()) + " vs " + std::to_string(it->second));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PredictionRecord> parse_predictions(std::string_view text) {
  std::vector<PredictionRecord> out;
  for (const Line& l : split_lines(text)) {
    PredictionRecord r{get_string(l, "input_id"), get_string(l, "model_id"),
                       get_string_or(l, "setup_id", ""), get_binary(l, "pred"), get_binary(l, "gold"),
                       get_optional_real(l, "logp_orig"), get_optional_real(l, "logp_edit")};
    if (r.logp_orig && *r.logp_orig > 0.0) fail(l.number, "logp_orig", "log-probability must be <= 0");
    if (r.logp_edit && *r.logp_edit > 0.0) fail(l.number, "logp_edit", "log-probability must be <= 0");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<JudgmentRecord> parse_judgments(std::string_view text) {
  std::vector<JudgmentRecord> out;
  for (const Line& l : split_lines(text)) {
    JudgmentRecord r;
    r.item_id = get_string(l, "item_id");
    r.model_id = get_string(l, "model_id");
    r.setup_id = get_string_or(l, "setup_id", "");
    const std::string metric = get_string(l, "metric");
    if (metric == "consistency") {
      r.metric = FaithMetric::Consistency;
    } else if (metric == "groundedness") {
      r.metric = FaithMetric::Groundedness;
    } else {
      fail(l.number, "metric", "expected 'consistency' or 'groundedness'");
    }
    r.rater_id = get_string(l, "rater_id");
    r.value = get_binary(l, "value");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PreferenceRecord> parse_preferences(std::string_view text) {
  std::vector<PreferenceRecord> out;
  for (const Line& l : split_lines(text)) {
    PreferenceRecord r;
    r.item_id = get_string(l, "item_id");
    r.model_a = get_string(l, "model_a");
    r.model_b = get_string(l, "model_b");
    if (r.model_a == r.model_b) fail(l.number, "model_b", "must differ from model_a");
    r.rater_id = get_string(l, "rater_id");
    const std::string w = get_string(l, "winner");
    if (w == "A") {
      r.winner = Winner::A;
    } else if (w == "B") {
      r.winner = Winner::B;
    } else {
      fail(l.number, "winner", "expected 'A' or 'B'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LabeledPair> parse_labeled_pairs(std::string_view text) {
  std::vector<LabeledPair> out;
  for (const Line& l : split_lines(text)) {
    LabeledPair r{get_string(l, "pair_id"), get_string(l, "message_id"), get_binary(l, "label"),
                  get_count(l, "persuasive_votes"), get_count(l, "unpersuasive_votes")};
    if (r.persuasive_votes + r.unpersuasive_votes == 0) fail(l.number, "persuasive_votes", "no votes");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& p) {
  return parse_annotations(read_file(p));
}
std::vector<RationaleRecord> load_rationales(const std::filesystem::path& p) {
  return parse_rationales(read_file(p));
}
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& p) {
  return parse_predictions(read_file(p));
}
std::vector<JudgmentRecord> load_judgments(const std::filesystem::path& p) {
  return parse_judgments(read_file(p));
}
std::vector<PreferenceRecord> load_preferences(const std::filesystem::path& p) {
  return parse_preferences(read_file(p));
}
std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& p) {
  return parse_labeled_pairs(read_file(p));
}

// ---------------------------------------------------------------------------
// Emission

std::string to_jsonl(const std::vector<AnnotationRecord>& records) {
  std::vector<ordered_json> rows;
  for (const auto& r : records) {
    ordered_json j;
    j["pair_id"] = r.pair_id;
    j["message_id"] = r.message_id;
    j["annotator_id"] = r.annotator_id;
    j["score"] = r.score;
    rows.push_back(std::move(j));
  }
  return dump_lines(rows);
}

std::string to_jsonl(const std::vector<RationaleRecord>& records) {
  std::vector<ordered_json> rows;
  for (const auto& r : records) {
    ordered_json j;
    j["input_id"] = r.input_id;
    j["source_id"] = r.source_id;
    j["generator_id"] = r.generator_id;
    j["label"] = r.label;
    if (r.text) j["text"] = *r.text;
    j["backend_id"] = r.backend_id;
    j["embedding"] = std::vector<double>(r.embedding.data(), r.embedding.data() + r.embedding.size());
    rows.push_back(std::move(j));
  }
  return dump_lines(rows);
}

std::string to_jsonl(const std::vector<PredictionRecord>& records) {
  std::vector<ordered_json> rows;
  for (const auto& r : records) {
    ordered_json j;
    j["input_id"] = r.input_id;
    j["model_id"] = r.model_id;
    j["setup_id"] = r.setup_id;
    j["pred"] = r.pred;
    j["gold"] = r.gold;
    if (r.logp_orig) j["logp_orig"] = *r.logp_orig;
    if (r.logp_edit) j["logp_edit"] = *r.logp_edit;
    rows.push_back(std::move(j));
  }
  return dump_lines(rows);
}

std::string to_jsonl(const std::vector<JudgmentRecord>& records) {
  std::vector<ordered_json> rows;
  for (const auto& r : records) {
    ordered_json j;
    j["item_id"] = r.item_id;
    j["model_id"] = r.model_id;
    j["setup_id"] = r.setup_id;
    j["metric"] = std::string(to_string(r.metric));
    j["rater_id"] = r.rater_id;
    j["value"] = r.value;
    rows.push_back(std::move(j));
  }
  return dump_lines(rows);
}

std::string to_jsonl(const std::vector<PreferenceRecord>& records) {
  std::vector<ordered_json> rows;
  for (const auto& r : records) {
    ordered_json j;
    j["item_id"] = r.item_id;
    j["model_a"] = r.model_a;
    j["model_b"] = r.model_b;
    j["rater_id"] = r.rater_id;
    j["winner"] = std::string(to_string(r.winner));
    rows.push_back(std::move(j));
  }
  return dump_lines(rows);
}

std::string to_jsonl(const std::vector<LabeledPair>& records) {
  std::vector<ordered_json> rows;
  for (const auto& r : records) {
    ordered_json j;
    j["pair_id"] = r.pair_id;
    j["message_id"] = r.message_id;
    j["label"] = r.label;
    j["persuasive_votes"] = r.persuasive_votes;
    j["unpersuasive_votes"] = r.unpersuasive_votes;
    rows.push_back(std::move(j));
  }
  return dump_lines(rows);
}

std::string canonicalize(std::string_view text, Schema schema) {
  switch (schema) {
    case Schema::Annotations: return to_jsonl(parse_annotations(text));
    case Schema::Rationales: return to_jsonl(parse_rationales(text));
    case Schema::Predictions: return to_jsonl(parse_predictions(text));
    case Schema::Judgments: return to_jsonl(parse_judgments(text));
    case Schema::Preferences: return to_jsonl(parse_preferences(text));
    case Schema::LabeledPairs: return to_jsonl(parse_labeled_pairs(text));
  }
  throw ValidationError("unknown schema");
}

// ---------------------------------------------------------------------------
// Grouping

std::vector<std::string> EmbeddingGroup::sources(std::string_view generator) const {
  std::set<std::string> s;
  for (const auto& m : members) {
    if (generator.empty() || m.generator_id == generator) s.insert(m.source_id);
  }
  return {s.begin(), s.end()};
}

GroupMap group_embeddings(const std::vector<RationaleRecord>& records) {
  std::map<GroupKey, std::vector<std::size_t>> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    index[{records[i].input_id, records[i].backend_id}].push_back(i);
  }
  GroupMap out;
  for (auto& [key, rows] : index) {
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return records[a].source_id < records[b].source_id;
    });
    EmbeddingGroup g{key.first, key.second, {}, {}};
    const Index d = records[rows.front()].embedding.size();
    g.embeddings.resize(static_cast<Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& rec = records[rows[r]];
      g.members.push_back({rec.source_id, rec.generator_id, rows[r]});
      g.embeddings.row(static_cast<Index>(r)) = rec.embedding.transpose();
    }
    out.emplace(key, std::move(g));
  }
  return out;
}

std::vector<EmbeddingGroup> groups_for_backend(const GroupMap& groups, std::string_view backend) {
  std::vector<EmbeddingGroup> out;
  for (const auto& [key, g] : groups) {
    if (key.second == backend) out.push_back(g);
  }
  return out;
}

}  // namespace ratkit
