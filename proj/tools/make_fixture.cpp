// Writes the bundled synthetic fixture: annotations, rationale embeddings from two
// backends, predictions with log-probabilities, faithfulness judgments, pairwise
// preferences and a model family map. Output is a pure function of the seed.

#include "ratkit/records.hpp"

#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <iostream>
#include <random>

using namespace ratkit;

namespace {

const std::array<const char*, 3> kSetups{"base", "grpo", "reasoning-sft"};
const std::array<const char*, 2> kFamilies{"phi-3.5-vision", "qwen2.5-vl-7b"};

// Sensitivity targets per (family, setup) and preference counts out of 50 per model pair,
// chosen so the pairwise alignment lands near r = 0.771, rho = 0.611.
double sensitivity_target(const std::string& family, const std::string& setup) {
  static const std::map<std::string, double> t{
      {"qwen2.5-vl-7b/base", 0.885},       {"qwen2.5-vl-7b/grpo", 0.737},  {"qwen2.5-vl-7b/reasoning-sft", 0.746},
      {"phi-3.5-vision/base", 0.766},      {"phi-3.5-vision/grpo", 0.517}, {"phi-3.5-vision/reasoning-sft", 0.665}};
  return t.at(family + "/" + setup);
}

double consistency_target(std::size_t model) { return std::array{0.99, 0.904, 0.99, 0.962, 0.9, 0.995}[model]; }
double groundedness_target(std::size_t model) { return std::array{0.708, 0.751, 0.703, 0.727, 0.78, 0.847}[model]; }

// In lexicographic pair order of the six model keys.
constexpr std::array<int, 15> kPreferenceWins{36, 35, 6, 50, 37, 7, 12, 7, 9, 7, 2, 5, 50, 43, 37};

std::string padded(std::string_view prefix, std::size_t i, int width = 3) {
  std::string n = std::to_string(i);
  return std::string(prefix) + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(n.size()))), '0') + n;
}

struct Source {
  const char* id;
  const char* generator;
  int base_length;
};

const std::array<Source, 7> kSources{{{"a-counter-global", "gen-a", 34},
                                      {"a-counter-local", "gen-a", 41},
                                      {"a-support-global", "gen-a", 28},
                                      {"a-support-local", "gen-a", 37},
                                      {"b-counter", "gen-b", 45},
                                      {"b-support-global", "gen-b", 26},
                                      {"b-support-local", "gen-b", 31}}};

const std::array<const char*, 16> kWords{"image", "message", "shows", "color",  "contrast", "figure", "text",  "appeal",
                                         "detail", "scene",  "tone",  "strong", "weak",     "because", "viewer", "claim"};

std::vector<AnnotationRecord> make_annotations(std::uint64_t seed) {
  Rng rng = make_stream(seed, 1);
  std::normal_distribution<double> normal;
  std::vector<AnnotationRecord> out;
  const std::size_t messages = 12, per_message = 4, annotators = 5;
  std::vector<double> bias(annotators);
  for (auto& b : bias) b = 0.8 * normal(rng);
  for (std::size_t m = 0; m < messages; ++m) {
    for (std::size_t p = 0; p < per_message; ++p) {
      const double latent = 5.0 + 2.2 * normal(rng);
      const std::string pair = padded("pair-", m * per_message + p);
      for (std::size_t a = 0; a < annotators; ++a) {
        double s = latent + bias[a] + 0.9 * normal(rng);
        s = std::clamp(std::round(s * 2.0) / 2.0, 0.0, 10.0);
        out.push_back({pair, padded("msg-", m, 2), padded("ann-", a, 1), s});
      }
    }
  }
  return out;
}

std::vector<RationaleRecord> make_rationales(std::uint64_t seed) {
  Rng rng = make_stream(seed, 2);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> word(0, static_cast<int>(kWords.size()) - 1), extra(0, 6);
  const Index latent = 12, inputs = 24;
  const std::array<std::pair<const char*, Index>, 2> backends{{{"enc-large", 32}, {"enc-small", 8}}};

  std::vector<MatrixXd> proj;
  for (const auto& [name, dim] : backends) {
    MatrixXd w(dim, latent);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng) / std::sqrt(static_cast<double>(latent));
    proj.push_back(std::move(w));
  }
  std::vector<VectorXd> offsets;
  for (std::size_t s = 0; s < kSources.size(); ++s) {
    VectorXd o(latent);
    for (Index i = 0; i < latent; ++i) o[i] = normal(rng);
    offsets.push_back(std::move(o));
  }

  std::vector<RationaleRecord> out;
  for (Index in = 0; in < inputs; ++in) {
    VectorXd center(latent);
    for (Index i = 0; i < latent; ++i) center[i] = 2.0 * normal(rng);
    const int label = static_cast<int>(in % 2);
    for (std::size_t s = 0; s < kSources.size(); ++s) {
      if (in % 7 == 3 && s == 4) continue;  // an input with one source missing
      VectorXd z = center + 0.8 * offsets[s];
      for (Index i = 0; i < latent; ++i) z[i] += 0.5 * normal(rng);
      std::string text;
      const int len = kSources[s].base_length + extra(rng);
      for (int t = 0; t < len; ++t) text += (t ? " " : "") + std::string(kWords[static_cast<std::size_t>(word(rng))]);
      for (std::size_t b = 0; b < backends.size(); ++b) {
        RationaleRecord r;
        r.input_id = padded("img-", static_cast<std::size_t>(in));
        r.source_id = kSources[s].id;
        r.generator_id = kSources[s].generator;
        r.label = label;
        r.text = text;
        r.embedding = proj[b] * z;
        for (Index i = 0; i < r.embedding.size(); ++i) r.embedding[i] += 0.05 * normal(rng);
        r.backend_id = backends[b].first;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> model_rows() {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const char* f : kFamilies) {
    for (const char* s : kSetups) rows.emplace_back(f, s);
  }
  return rows;  // lexicographic by (family, setup)
}

// First round(target * n) items get value 1, then the order is shuffled.
std::vector<int> exact_ones(double target, std::size_t n, Rng& rng) {
  const auto ones = static_cast<std::size_t>(std::llround(target * static_cast<double>(n)));
  std::vector<int> v(n, 0);
  std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(ones), 1);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

std::vector<PredictionRecord> make_predictions(std::uint64_t seed) {
  Rng rng = make_stream(seed, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = 200;
  std::vector<PredictionRecord> out;
  const auto rows = model_rows();
  const std::array<double, 6> accuracy{0.71, 0.74, 0.76, 0.78, 0.81, 0.83};
  for (std::size_t m = 0; m < rows.size(); ++m) {
    const auto& [family, setup] = rows[m];
    const auto sens = exact_ones(sensitivity_target(family, setup), n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      PredictionRecord p;
      p.input_id = padded("img-", i);
      p.model_id = family;
      p.setup_id = setup;
      p.gold = unit(rng) < 0.45 ? 1 : 0;
      p.pred = unit(rng) < accuracy[m] ? p.gold : 1 - p.gold;
      const double lo = -0.05 - 2.0 * unit(rng);
      const double gap = 0.02 + 1.5 * unit(rng);
      p.logp_orig = sens[i] ? lo : lo - gap;
      p.logp_edit = sens[i] ? lo - gap : lo;
      if (i % 50 == 49) p.logp_edit.reset();  // some predictions without an edited run
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<JudgmentRecord> make_judgments(std::uint64_t seed) {
  Rng rng = make_stream(seed, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t items = 40, raters = 3;
  std::vector<JudgmentRecord> out;
  const auto rows = model_rows();
  for (std::size_t m = 0; m < rows.size(); ++m) {
    const auto& [family, setup] = rows[m];
    for (FaithMetric metric : {FaithMetric::Consistency, FaithMetric::Groundedness}) {
      const double target = metric == FaithMetric::Consistency ? consistency_target(m) : groundedness_target(m);
      const auto truth = exact_ones(target, items, rng);
      for (std::size_t i = 0; i < items; ++i) {
        for (std::size_t r = 0; r < raters; ++r) {
          JudgmentRecord j;
          j.item_id = padded("img-", i);
          j.model_id = family;
          j.setup_id = setup;
          j.metric = metric;
          j.rater_id = padded("judge-", r + 1, 1);
          j.value = unit(rng) < 0.12 ? 1 - truth[i] : truth[i];
          out.push_back(std::move(j));
        }
      }
    }
  }
  return out;
}

std::vector<PreferenceRecord> make_preferences() {
  std::vector<std::string> keys;
  for (const auto& [f, s] : model_rows()) keys.push_back(f + "/" + s);
  std::vector<PreferenceRecord> out;
  std::size_t p = 0;
  for (std::size_t a = 0; a < keys.size(); ++a) {
    for (std::size_t b = a + 1; b < keys.size(); ++b, ++p) {
      for (int item = 0; item < 50; ++item) {
        const bool first_wins = item < kPreferenceWins[p];
        PreferenceRecord r;
        r.item_id = padded("item-", static_cast<std::size_t>(item), 2);
        r.rater_id = "pref-1";
        // Alternate presentation order so both sides appear as model_a.
        if (item % 2 == 0) {
          r.model_a = keys[a];
          r.model_b = keys[b];
          r.winner = first_wins ? Winner::A : Winner::B;
        } else {
          r.model_a = keys[b];
          r.model_b = keys[a];
          r.winner = first_wins ? Winner::B : Winner::A;
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic ratkit fixture"};
  std::string dir = "fixtures";
  std::uint64_t seed = 20240611;
  app.add_option("--out-dir", dir, "destination directory");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const std::filesystem::path out(dir);
    write_file(out / "annotations.jsonl", to_jsonl(make_annotations(seed)));
    write_file(out / "rationales.jsonl", to_jsonl(make_rationales(seed)));
    write_file(out / "predictions.jsonl", to_jsonl(make_predictions(seed)));
    write_file(out / "judgments.jsonl", to_jsonl(make_judgments(seed)));
    write_file(out / "preferences.jsonl", to_jsonl(make_preferences()));
    std::string families = "model,family\n";
    for (const auto& [f, s] : model_rows()) families += f + "/" + s + "," + f + "\n";
    write_file(out / "families.csv", families);
  } catch (const std::exception& e) {
    std::cerr << "ratkit_fixture: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
