#include "ratkit/metrics.hpp"

#include <cctype>

namespace ratkit {

Ratio Ratio::of(double num, double den, std::string_view why_undefined) {
  if (den > 0.0) return {num / den, {}};
  return {std::nullopt, std::string(why_undefined)};
}

ClassificationMetrics classification_metrics(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size()) throw ValidationError("classification metrics: length mismatch");
  if (predicted.empty()) throw ValidationError("classification metrics: empty input");
  ClassificationMetrics m;
  auto& c = m.confusion;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == 1, g = gold[i] == 1;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const auto tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  m.precision = Ratio::of(tp, tp + fp, "no positive predictions");
  m.recall = Ratio::of(tp, tp + fn, "no positive gold labels");
  m.specificity = Ratio::of(tn, tn + fp, "no negative gold labels");
  if (m.recall.value && m.specificity.value) {
    m.balanced_accuracy.value = 0.5 * (*m.recall.value + *m.specificity.value);
  } else {
    m.balanced_accuracy.reason = "gold labels contain a single class";
  }
  if (m.precision.value && m.recall.value) {
    // Harmonic mean of precision and recall; 0 when tp = 0.
    m.f1 = Ratio::of(2.0 * tp, 2.0 * tp + fp + fn, "no positives at all");
  } else {
    m.f1.reason = !m.precision.value ? m.precision.reason : m.recall.reason;
  }
  return m;
}

ClassificationMetrics classification_metrics(const std::vector<PredictionRecord>& records) {
  std::vector<int> pred, gold;
  pred.reserve(records.size());
  gold.reserve(records.size());
  for (const auto& r : records) {
    pred.push_back(r.pred);
    gold.push_back(r.gold);
  }
  return classification_metrics(pred, gold);
}

AgreementResult fleiss_kappa(const Eigen::MatrixXi& counts) {
  const Index items = counts.rows();
  if (items == 0 || counts.cols() == 0) throw ValidationError("fleiss kappa: empty count table");
  if ((counts.array() < 0).any()) throw ValidationError("fleiss kappa: negative count");
  const Eigen::VectorXi raters = counts.rowwise().sum();
  const int n = raters[0];
  if (n < 2) throw ValidationError("fleiss kappa: needs at least two raters per item");
  if ((raters.array() != n).any()) throw ValidationError("fleiss kappa: unequal rater counts across items");

  const Eigen::MatrixXd c = counts.cast<double>();
  const double nd = n;
  const Eigen::VectorXd per_item = (c.array().square().rowwise().sum() - nd) / (nd * (nd - 1.0));
  AgreementResult out;
  out.observed_agreement = per_item.mean();
  const Eigen::RowVectorXd share = c.colwise().sum() / (static_cast<double>(items) * nd);
  out.expected_agreement = share.squaredNorm();
  if (out.expected_agreement >= 1.0) {
    // Every rating fell in one category: agreement is perfect by construction.
    out.kappa = 1.0;
  } else {
    out.kappa = (out.observed_agreement - out.expected_agreement) / (1.0 - out.expected_agreement);
  }
  return out;
}

AgreementResult cohen_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ValidationError("cohen kappa: length mismatch");
  if (a.empty()) throw ValidationError("cohen kappa: empty input");
  const auto n = static_cast<double>(a.size());
  double agree = 0.0, a1 = 0.0, b1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i] ? 1.0 : 0.0;
    a1 += a[i] == 1 ? 1.0 : 0.0;
    b1 += b[i] == 1 ? 1.0 : 0.0;
  }
  AgreementResult out;
  out.observed_agreement = agree / n;
  const double pa = a1 / n, pb = b1 / n;
  out.expected_agreement = pa * pb + (1.0 - pa) * (1.0 - pb);
  if (out.observed_agreement == 1.0) {
    out.kappa = 1.0;
  } else {
    out.kappa = (out.observed_agreement - out.expected_agreement) / (1.0 - out.expected_agreement);
  }
  return out;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t tokens = 0;
  bool inside = false;
  for (char ch : text) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !inside) ++tokens;
    inside = !space;
  }
  return tokens;
}

LengthStats length_stats(std::span<const std::string> texts) {
  LengthStats out;
  double total = 0.0;
  for (const auto& t : texts) {
    out.per_text.push_back(count_tokens(t));
    total += static_cast<double>(out.per_text.back());
  }
  if (!texts.empty()) out.avg_tokens = total / static_cast<double>(texts.size());
  return out;
}

std::map<std::string, LengthGroup> length_by_source(const std::vector<RationaleRecord>& records) {
  std::map<std::string, std::vector<std::string>> texts;
  std::map<std::string, LengthGroup> out;
  for (const auto& r : records) {
    auto& g = out[r.source_id];
    if (r.text) {
      texts[r.source_id].push_back(*r.text);
    } else {
      ++g.missing;
    }
  }
  for (auto& [source, g] : out) {
    const auto& t = texts[source];
    g.texts = t.size();
    g.avg_tokens = length_stats(t).avg_tokens;
  }
  return out;
}

}  // namespace ratkit
