#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "grkt/autodiff.hpp"
#include "grkt/data.hpp"
#include "grkt/gnn.hpp"
#include "grkt/graph.hpp"
#include "grkt/params.hpp"

namespace grkt {

enum class Mode : std::uint8_t { kTrain, kEval };

/// Gaps are fed to the kernels in minutes, capped at 30 days.
inline constexpr double kSecondsPerMinute = 60.0;
inline constexpr double kMaxGapMinutes = 43200.0;
double gap_minutes(double gap_seconds);

/// Fresh parameters for |Q| questions and |C| KCs, seeded by hp.seed.
ParameterStore init_parameters(std::size_t num_questions, std::size_t num_kcs, const HyperParams& hp);

struct ModelOptions {
  bool learn_forget = true;  // false: the -LF ablation
};

/// Read-only view pairing a parameter store with the relation graphs.
class GrktModel {
 public:
  struct Mlp {
    std::size_t w1, b1, w2, b2;
  };
  struct Index {
    std::size_t question_embedding, kc_embedding, req, w_h_raw, h0;
    std::array<std::size_t, 3> cor;
    Mlp diff, gain, loss, dcs, prg;
    std::array<GnnIndex, 6> gnn;
  };

  GrktModel(const ParameterStore& store, KcRelationGraphs graphs, ModelOptions options = {});

  const ParameterStore& store() const { return *store_; }
  const KcRelationGraphs& graphs() const { return graphs_; }
  const GraphAdjacency& adjacency() const { return adjacency_; }
  const ModelOptions& options() const { return options_; }
  const HyperParams& hyper() const { return store_->hyper; }
  std::size_t num_kcs() const { return graphs_.num_kcs(); }
  std::size_t num_questions() const { return store_->num_questions; }
  const GnnSpec& spec(GnnKind k) const { return specs_[static_cast<std::size_t>(k)]; }
  const Index& index() const { return index_; }

 private:
  const ParameterStore* store_;
  KcRelationGraphs graphs_;
  GraphAdjacency adjacency_;
  ModelOptions options_;
  std::array<GnnSpec, 6> specs_;
  Index index_;
};

/// softmax(w_h_raw) as a plain vector.
std::vector<double> projection_weights(const ParameterStore& store);
/// h_c . softmax(w_h_raw)
double mastery(const Matrix& memory, KcId c, const ParameterStore& store);
std::vector<double> mastery_vector(const Matrix& memory, std::span<const double> weights);

/// What Stage III decided at one step.
struct LearnStep {
  std::vector<KcId> candidates;
  std::vector<double> learn_probability;  // pi_1 per candidate
  std::vector<char> decided;              // pi_1 > pi_0
  std::vector<char> learned;              // per KC: progress row nonzero
  Matrix progress;                        // propagated progress, |C| x d_k
  double minutes = 0.0;
};

/// Runs the three stages for one sequence on one tape. Memory starts at H_0.
class SequenceRunner {
 public:
  struct Retrieval {
    ad::Var probability;
    ad::Var aggregated_mastery;
    ad::Var difficulty;
  };

  SequenceRunner(const GrktModel& model, ParamBinder& binder, Mode mode);

  /// Stage I on the current memory. Does not change the memory.
  Retrieval retrieve(QuestionId q, std::span<const KcId> kcs);
  /// Stage II: adds the propagated gain (correct) or loss (incorrect).
  void strengthen(QuestionId q, std::span<const KcId> kcs, bool correct);
  /// Stage III between response (q, kcs) and the next one. No-op with learn_forget off.
  void learn_forget(QuestionId q, std::span<const KcId> kcs, QuestionId q_next, std::span<const KcId> kcs_next,
                    double gap_seconds);

  ad::Var memory() const { return h_; }
  std::vector<double> mastery() const;
  const std::vector<std::uint32_t>& learn_counts() const { return counts_; }
  const LearnStep& last_learn_step() const { return last_; }
  /// Every discrete choice made so far (learn decisions and learned rows).
  const std::vector<char>& signature() const { return signature_; }

  /// Kernel rates, computed once per sequence (invalid when learn_forget is off).
  ad::Var learn_rate() const { return learn_rate_; }
  ad::Var forget_rate() const { return forget_rate_; }

 private:
  struct Context {
    ad::Var e_bar;  // [mean K(kcs) ++ e_q]
    ad::Var alpha;  // 1 x |C|
  };
  const Context& context(QuestionId q, std::span<const KcId> kcs);
  ad::Var mlp(const GrktModel::Mlp& m, ad::Var x);
  ad::Var repeat_row(ad::Var row, std::size_t n);

  const GrktModel* model_;
  ParamBinder* binder_;
  Mode mode_;
  std::size_t n_;
  ad::Var k_, w_req_, w_h_, h0_, h_;
  CorrelationCache corr_;
  std::array<GnnWeights, 6> weights_;
  ad::Var learn_rate_, forget_rate_;
  std::vector<std::uint32_t> counts_;
  std::map<std::pair<QuestionId, std::vector<KcId>>, Context> contexts_;
  LearnStep last_;
  std::vector<char> signature_;
};

struct StepOutput {
  double prediction = 0.0;
  double aggregated_mastery = 0.0;
  double difficulty = 0.0;
  std::optional<double> repeat_prediction;
};

/// Per-step mastery of every KC: before the response (t-), after Stage II (t)
/// and after Stage III (the next step's t-; empty after the last response).
struct MasteryTrace {
  struct Step {
    std::size_t step = 0;
    std::int64_t timestamp = 0;
    QuestionId question = 0;
    std::vector<KcId> kcs;
    std::uint8_t correct = 0;
    double predicted = 0.0;
    std::vector<double> pre;
    std::vector<double> post;
    std::vector<double> after_learning;
  };
  StudentId student = 0;
  std::size_t sequence = 0;
  std::vector<Step> steps;
};

struct SequenceOptions {
  Mode mode = Mode::kEval;
  bool trace = false;
  bool repetition = false;
};

struct SequenceResult {
  std::vector<StepOutput> steps;  // one per real response
  double loss_sum = 0.0;          // sum of per-step cross-entropy
  std::optional<MasteryTrace> trace;
  std::vector<char> signature;
};

SequenceResult forward_sequence(const GrktModel& model, const ResponseSequence& seq, const SequenceOptions& opt = {});

struct SequenceGradient {
  double loss_sum = 0.0;
  std::size_t count = 0;
  Gradients grads;
  std::vector<char> signature;
};

/// Gradient of `scale` * (sum of per-step cross-entropy) over the real steps.
SequenceGradient sequence_gradient(const GrktModel& model, const ResponseSequence& seq, double scale = 1.0,
                                   Mode mode = Mode::kTrain);

/// Replays `history`, runs Stage III for the gap up to `timestamp`, then Stage I.
double predict_next(const GrktModel& model, std::span<const Response> history, QuestionId q,
                    std::span<const KcId> kcs, std::int64_t timestamp);

}  // namespace grkt
