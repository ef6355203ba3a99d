#include "grkt/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "grkt/errors.hpp"

namespace grkt {

std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw Error("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks over tie groups.
  double pos_rank_sum = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) {
        pos_rank_sum += midrank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1) / 2) / (p * q);
}

double accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  if (scores.size() != labels.size()) throw Error("accuracy: scores and labels differ in length");
  if (scores.empty()) throw Error("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hits += (scores[i] >= threshold) == (labels[i] != 0);
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

void ConsistencyAccumulator::add_step(std::span<const KcId> examined, std::span<const double> pre,
                                      std::span<const double> post) {
  if (pre.size() != post.size()) throw Error("consistency: snapshot sizes differ");
  const bool qualifies = std::any_of(examined.begin(), examined.end(), [&](KcId c) {
    return rule_ == ConsistencyRule::kDecline ? post[c] < pre[c] : post[c] <= pre[c];
  });
  if (!qualifies) return;
  ++steps_;
  for (std::size_t c = 0; c < pre.size(); ++c) consistent_ += post[c] <= pre[c];
  total_ += pre.size();
}

void ConsistencyAccumulator::merge(const ConsistencyAccumulator& other) {
  steps_ += other.steps_;
  consistent_ += other.consistent_;
  total_ += other.total_;
}

double ConsistencyAccumulator::value() const {
  if (total_ == 0) return 1.0;
  return static_cast<double>(consistent_) / static_cast<double>(total_);
}

std::optional<double> gaucm(std::span<const EvalRecord> records) {
  std::map<QuestionId, std::pair<std::vector<double>, std::vector<std::uint8_t>>> by_question;
  for (const auto& r : records) {
    auto& [s, l] = by_question[r.question];
    s.push_back(r.mastery);
    l.push_back(r.correct);
  }
  double weighted = 0, weight = 0;
  for (const auto& [q, sl] : by_question) {
    auto a = auc(sl.first, sl.second);
    if (!a) continue;
    const double n = static_cast<double>(sl.first.size());
    weighted += n * *a;
    weight += n;
  }
  if (weight == 0) return std::nullopt;
  return weighted / weight;
}

double repetition(std::span<const double> repeat_predictions, std::span<const std::uint8_t> labels) {
  return accuracy(repeat_predictions, labels, 0.5);
}

double repetition(const RepeatProbe& probe, std::span<const ResponseSequence> sequences) {
  std::vector<double> preds;
  std::vector<std::uint8_t> labels;
  for (const auto& seq : sequences) {
    auto real = seq.real();
    for (std::size_t t = 0; t < real.size(); ++t) {
      preds.push_back(probe(seq, t));
      labels.push_back(real[t].correct);
    }
  }
  return repetition(preds, labels);
}

}  // namespace grkt
