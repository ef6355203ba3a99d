#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "grkt/data.hpp"

namespace grkt {

/// Mann-Whitney AUC with ties credited 0.5. Empty when only one class is present.
std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Fraction with (score >= threshold) == label. Throws on empty input.
double accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold = 0.5);

enum class ConsistencyRule : std::uint8_t {
  kDecline,      // a step qualifies when an examined KC's mastery strictly drops
  kNonIncrease,  // a step qualifies when an examined KC's mastery does not rise
};

/// Consistency over (pre, post) mastery snapshots: among qualifying steps,
/// the fraction of all KCs whose mastery does not rise. 1.0 when no step qualifies.
class ConsistencyAccumulator {
 public:
  explicit ConsistencyAccumulator(ConsistencyRule rule = ConsistencyRule::kDecline) : rule_(rule) {}

  void add_step(std::span<const KcId> examined, std::span<const double> pre, std::span<const double> post);
  void merge(const ConsistencyAccumulator& other);
  double value() const;
  std::size_t qualifying_steps() const { return steps_; }
  std::uint64_t consistent() const { return consistent_; }
  std::uint64_t total() const { return total_; }

 private:
  ConsistencyRule rule_;
  std::size_t steps_ = 0;
  std::uint64_t consistent_ = 0;
  std::uint64_t total_ = 0;
};

struct EvalRecord {
  double prediction = 0.0;
  std::uint8_t correct = 0;
  QuestionId question = 0;
  double mastery = 0.0;  // aggregated Stage-I mastery
};

/// Per-question AUC of (mastery, correctness) weighted by the question's
/// response count. Questions with one outcome class are left out; empty when
/// none remain.
std::optional<double> gaucm(std::span<const EvalRecord> records);

/// Answers a repeat of response t of `seq` right after responses 0..t were processed.
using RepeatProbe = std::function<double(const ResponseSequence& seq, std::size_t t)>;

/// Accuracy of the thresholded re-ask predictions against the original outcomes.
double repetition(std::span<const double> repeat_predictions, std::span<const std::uint8_t> labels);
double repetition(const RepeatProbe& probe, std::span<const ResponseSequence> sequences);

struct MetricReport {
  std::optional<double> auc;
  double acc = 0.0;
  double consistency = 1.0;
  std::optional<double> gaucm;
  double repetition = 0.0;
  std::size_t responses = 0;
};

}  // namespace grkt
