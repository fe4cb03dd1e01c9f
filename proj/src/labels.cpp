#include "ratkit/labels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace ratkit {

double quantile(std::vector<double> values, double p, QuartileMethod method) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  const auto last = values.size() - 1;
  auto interpolate = [&](double h) {
    h = std::clamp(h, 0.0, static_cast<double>(last));
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, last);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  switch (method) {
    case QuartileMethod::Linear:
      return interpolate((n - 1.0) * p);
    case QuartileMethod::Exclusive:
      return interpolate((n + 1.0) * p - 1.0);
    case QuartileMethod::Nearest: {
      const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(n * p)));
      return values[std::min(k - 1, last)];
    }
  }
  return interpolate((n - 1.0) * p);
}

std::vector<AnnotatorProfile> annotator_profiles(const std::vector<AnnotationRecord>& records,
                                                 QuartileMethod method) {
  std::map<std::string, std::vector<double>> scores;
  for (const auto& r : records) scores[r.annotator_id].push_back(r.score);
  std::vector<AnnotatorProfile> out;
  out.reserve(scores.size());
  for (auto& [id, s] : scores) {
    out.push_back({id, quantile(s, 0.25, method), quantile(s, 0.75, method), s.size()});
  }
  return out;
}

std::optional<int> binary_vote(double score, const AnnotatorProfile& profile) {
  if (score > profile.q3) return 1;
  if (score < profile.q1) return 0;
  return std::nullopt;
}

std::optional<int> aggregate_label(std::span<const int> votes, std::size_t min_votes) {
  const std::size_t total = votes.size();
  if (total == 0 || total < min_votes) return std::nullopt;
  const auto positive = static_cast<std::size_t>(std::count(votes.begin(), votes.end(), 1));
  const std::size_t negative = total - positive;
  // Integer form of fraction >= 0.75.
  if (4 * positive >= 3 * total) return 1;
  if (4 * negative >= 3 * total) return 0;
  return std::nullopt;
}

ReconstructionResult reconstruct_labels(const std::vector<AnnotationRecord>& records,
                                        QuartileMethod method, std::size_t min_votes) {
  ReconstructionResult out;
  out.profiles = annotator_profiles(records, method);
  std::map<std::string, const AnnotatorProfile*> by_annotator;
  for (const auto& p : out.profiles) by_annotator[p.annotator_id] = &p;

  struct Tally {
    std::string message_id;
    std::vector<int> votes;
  };
  std::map<std::string, Tally> pairs;
  for (const auto& r : records) {
    auto [it, inserted] = pairs.try_emplace(r.pair_id, Tally{r.message_id, {}});
    if (!inserted && it->second.message_id != r.message_id) {
      throw ValidationError("pair '" + r.pair_id + "' is attached to messages '" + it->second.message_id +
                            "' and '" + r.message_id + "'");
    }
    if (auto v = binary_vote(r.score, *by_annotator.at(r.annotator_id))) it->second.votes.push_back(*v);
  }
  for (const auto& [pair_id, tally] : pairs) {
    const auto label = aggregate_label(tally.votes, min_votes);
    if (!label) {
      out.discarded.push_back(pair_id);
      continue;
    }
    const auto positive = static_cast<std::size_t>(std::count(tally.votes.begin(), tally.votes.end(), 1));
    out.pairs.push_back({pair_id, tally.message_id, *label, positive, tally.votes.size() - positive});
  }
  return out;
}

double positive_rate(const std::vector<LabeledPair>& pairs) {
  if (pairs.empty()) return 0.0;
  const auto pos = std::count_if(pairs.begin(), pairs.end(), [](const LabeledPair& p) { return p.label == 1; });
  return static_cast<double>(pos) / static_cast<double>(pairs.size());
}

namespace {

struct MessageBlock {
  std::string id;
  std::vector<std::size_t> pairs;
};

SplitResult assemble(const std::vector<LabeledPair>& pairs, const std::vector<MessageBlock>& messages,
                     const std::vector<bool>& in_test) {
  SplitResult s;
  for (std::size_t m = 0; m < messages.size(); ++m) {
    auto& side = in_test[m] ? s.test : s.train;
    (in_test[m] ? s.test_messages : s.train_messages).insert(messages[m].id);
    for (auto i : messages[m].pairs) side.push_back(pairs[i]);
  }
  auto by_id = [](const LabeledPair& a, const LabeledPair& b) { return a.pair_id < b.pair_id; };
  std::sort(s.train.begin(), s.train.end(), by_id);
  std::sort(s.test.begin(), s.test.end(), by_id);
  if (!s.train.empty() && !s.test.empty()) {
    s.positive_rate_gap = std::abs(positive_rate(s.train) - positive_rate(s.test));
  }
  return s;
}

}  // namespace

SplitResult message_disjoint_split(const std::vector<LabeledPair>& pairs, double test_fraction,
                                   double balance_tolerance, std::uint64_t seed, std::size_t max_attempts) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test fraction must lie in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> grouped;
  for (std::size_t i = 0; i < pairs.size(); ++i) grouped[pairs[i].message_id].push_back(i);
  std::vector<MessageBlock> messages;
  for (auto& [id, idx] : grouped) messages.push_back({id, std::move(idx)});

  const auto target = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(pairs.size())));

  if (messages.size() < 2) {
    SplitResult s = assemble(pairs, messages, std::vector<bool>(messages.size(), false));
    s.balanced = false;
    return s;
  }

  std::vector<bool> best_assignment;
  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t attempts = 0;
  std::vector<std::size_t> order(messages.size());
  for (std::size_t a = 0; a < max_attempts; ++a) {
    ++attempts;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_stream(seed, a);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<bool> in_test(messages.size(), false);
    std::size_t test_n = 0, test_pos = 0, train_n = 0, train_pos = 0;
    for (auto m : order) {
      std::size_t n = messages[m].pairs.size();
      std::size_t pos = 0;
      for (auto i : messages[m].pairs) pos += static_cast<std::size_t>(pairs[i].label);
      if (test_n + n <= target) {
        in_test[m] = true;
        test_n += n;
        test_pos += pos;
      } else {
        train_n += n;
        train_pos += pos;
      }
    }
    if (test_n == 0 || train_n == 0) continue;
    const double gap = std::abs(static_cast<double>(train_pos) / static_cast<double>(train_n) -
                                static_cast<double>(test_pos) / static_cast<double>(test_n));
    if (gap < best_gap) {
      best_gap = gap;
      best_assignment = in_test;
    }
    if (gap <= balance_tolerance) break;
  }

  if (best_assignment.empty()) {
    // Every message is larger than the test target: put the smallest one on the test side.
    best_assignment.assign(messages.size(), false);
    std::size_t smallest = 0;
    for (std::size_t m = 1; m < messages.size(); ++m) {
      if (messages[m].pairs.size() < messages[smallest].pairs.size()) smallest = m;
    }
    best_assignment[smallest] = true;
  }
  SplitResult s = assemble(pairs, messages, best_assignment);
  s.attempts = attempts;
  s.balanced = !s.train.empty() && !s.test.empty() && s.positive_rate_gap <= balance_tolerance;
  return s;
}

}  // namespace ratkit
