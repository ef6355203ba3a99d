#include "grkt/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "grkt/errors.hpp"

namespace grkt {

double gap_minutes(double gap_seconds) {
  return std::min(std::max(gap_seconds, 0.0) / kSecondsPerMinute, kMaxGapMinutes);
}

namespace {

Matrix uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (auto& v : m.data) v = dist(rng);
  return m;
}

void add_mlp(ParameterStore& s, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
             std::mt19937_64& rng) {
  s.add("mlp." + name + ".W1", uniform(in, hidden, in, rng));
  s.add("mlp." + name + ".b1", Matrix(1, hidden));
  s.add("mlp." + name + ".W2", uniform(hidden, out, hidden, rng));
  s.add("mlp." + name + ".b2", Matrix(1, out));
}

GrktModel::Mlp mlp_index(const ParameterStore& s, const std::string& name) {
  return {s.index("mlp." + name + ".W1"), s.index("mlp." + name + ".b1"), s.index("mlp." + name + ".W2"),
          s.index("mlp." + name + ".b2")};
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<std::size_t> as_rows(std::span<const KcId> kcs) { return {kcs.begin(), kcs.end()}; }

}  // namespace

ParameterStore init_parameters(std::size_t num_questions, std::size_t num_kcs, const HyperParams& hp) {
  hp.validate();
  if (num_questions == 0 || num_kcs == 0) throw ConfigError("model needs at least one question and one KC");
  std::mt19937_64 rng(hp.seed);
  const std::size_t de = hp.embed_dim, dk = hp.memory_dim, dh = hp.hidden_dim;
  ParameterStore s;
  s.hyper = hp;
  s.num_questions = num_questions;
  s.num_kcs = num_kcs;
  s.add("question_embedding", uniform(num_questions + 1, de, de, rng));
  s.add("kc_embedding", uniform(num_kcs + 1, de, de, rng));
  for (auto r : kRelations) s.add("cor." + std::string(relation_name(r)), uniform(de, de, de, rng));
  s.add("req", uniform(de, de, de, rng));
  s.add("w_h_raw", Matrix(dk, 1));
  s.add("H0", Matrix(num_kcs, dk, 0.1));
  add_mlp(s, "diff", 2 * de, dh, 1, rng);
  add_mlp(s, "gain", dk + 2 * de, dh, dk, rng);
  add_mlp(s, "loss", dk + 2 * de, dh, dk, rng);
  add_mlp(s, "dcs", dk + 4 * de, dh, 2, rng);
  add_mlp(s, "prg", dk + 4 * de, dh, dk, rng);
  for (auto k : kGnnKinds) add_gnn_parameters(s, GnnSpec::make(k, hp), rng);
  return s;
}

GrktModel::GrktModel(const ParameterStore& store, KcRelationGraphs graphs, ModelOptions options)
    : store_(&store), graphs_(std::move(graphs)), options_(options) {
  if (graphs_.num_kcs() != store.num_kcs)
    throw ConfigError("graphs cover " + std::to_string(graphs_.num_kcs()) + " KCs but the parameters cover " +
                      std::to_string(store.num_kcs));
  adjacency_ = GraphAdjacency::from(graphs_);
  for (auto k : kGnnKinds) specs_[static_cast<std::size_t>(k)] = GnnSpec::make(k, store.hyper);
  auto& ix = index_;
  ix.question_embedding = store.index("question_embedding");
  ix.kc_embedding = store.index("kc_embedding");
  ix.req = store.index("req");
  ix.w_h_raw = store.index("w_h_raw");
  ix.h0 = store.index("H0");
  for (auto r : kRelations) ix.cor[index_of(r)] = store.index("cor." + std::string(relation_name(r)));
  ix.diff = mlp_index(store, "diff");
  ix.gain = mlp_index(store, "gain");
  ix.loss = mlp_index(store, "loss");
  ix.dcs = mlp_index(store, "dcs");
  ix.prg = mlp_index(store, "prg");
  for (auto k : kGnnKinds)
    ix.gnn[static_cast<std::size_t>(k)] = GnnIndex::lookup(store, specs_[static_cast<std::size_t>(k)]);
}

std::vector<double> projection_weights(const ParameterStore& store) {
  return constrain_nonneg_vector(store.value("w_h_raw").data);
}

std::vector<double> mastery_vector(const Matrix& memory, std::span<const double> weights) {
  std::vector<double> m(memory.rows, 0.0);
  for (std::size_t r = 0; r < memory.rows; ++r)
    for (std::size_t c = 0; c < memory.cols; ++c) m[r] += memory(r, c) * weights[c];
  return m;
}

double mastery(const Matrix& memory, KcId c, const ParameterStore& store) {
  auto w = projection_weights(store);
  double m = 0;
  for (std::size_t k = 0; k < memory.cols; ++k) m += memory(c, k) * w[k];
  return m;
}

SequenceRunner::SequenceRunner(const GrktModel& model, ParamBinder& binder, Mode mode)
    : model_(&model), binder_(&binder), mode_(mode), n_(model.num_kcs()), counts_(model.num_kcs(), 0) {
  const auto& ix = model.index();
  auto& b = binder;
  auto rows = iota(n_);
  k_ = ad::select_rows(b(ix.kc_embedding), rows);
  w_req_ = b(ix.req);
  w_h_ = ad::softmax_columns(b(ix.w_h_raw));
  h0_ = b(ix.h0);
  h_ = h0_;
  const auto& adj = model.adjacency();
  for (std::size_t g = 0; g < 3; ++g)
    if (adj.rel[g].num_edges() > 0) corr_.beta[g] = ad::edge_bilinear_sigmoid(k_, b(ix.cor[g]), adj.rel[g]);
  const bool lf = model.options().learn_forget;
  for (auto k : kGnnKinds) {
    if (!lf && (k == GnnKind::kProgress || k == GnnKind::kLearn || k == GnnKind::kForget)) continue;
    auto i = static_cast<std::size_t>(k);
    weights_[i] = GnnWeights::bind(b, model.spec(k), ix.gnn[i]);
  }
  if (lf) {
    auto i_l = static_cast<std::size_t>(GnnKind::kLearn), i_f = static_cast<std::size_t>(GnnKind::kForget);
    learn_rate_ = gnn_forward(model.spec(GnnKind::kLearn), k_, adj, corr_, weights_[i_l]);
    forget_rate_ = gnn_forward(model.spec(GnnKind::kForget), k_, adj, corr_, weights_[i_f]);
  }
}

const SequenceRunner::Context& SequenceRunner::context(QuestionId q, std::span<const KcId> kcs) {
  std::pair<QuestionId, std::vector<KcId>> key{q, {kcs.begin(), kcs.end()}};
  auto it = contexts_.find(key);
  if (it != contexts_.end()) return it->second;
  if (q >= model_->num_questions()) throw Error("unknown question id " + std::to_string(q));
  if (kcs.empty()) throw Error("response without KCs");
  for (auto c : kcs)
    if (c >= n_) throw Error("unknown KC id " + std::to_string(c));
  std::size_t row = q;
  auto e_q = binder_->gather(model_->index().question_embedding, std::span<const std::size_t>(&row, 1));
  auto kbar = ad::mean_rows(ad::select_rows(k_, as_rows(kcs)));
  Context ctx;
  std::array<ad::Var, 2> parts{kbar, e_q};
  ctx.e_bar = ad::concat_cols(parts);
  ctx.alpha = ad::sigmoid(ad::matmul_nt(ad::matmul(e_q, w_req_), k_));
  return contexts_.emplace(std::move(key), ctx).first->second;
}

ad::Var SequenceRunner::mlp(const GrktModel::Mlp& m, ad::Var x) {
  auto& b = *binder_;
  auto hidden = ad::relu(ad::add_row(ad::matmul(x, b(m.w1)), b(m.b1)));
  return ad::add_row(ad::matmul(hidden, b(m.w2)), b(m.b2));
}

ad::Var SequenceRunner::repeat_row(ad::Var row, std::size_t n) {
  std::vector<std::size_t> idx(n, 0);
  return ad::select_rows(row, idx);
}

SequenceRunner::Retrieval SequenceRunner::retrieve(QuestionId q, std::span<const KcId> kcs) {
  const auto& ctx = context(q, kcs);
  auto i = static_cast<std::size_t>(GnnKind::kRetrieval);
  auto x = gnn_forward(model_->spec(GnnKind::kRetrieval), h_, model_->adjacency(), corr_, weights_[i], ctx.alpha);
  auto hbar = ad::mean_rows(ad::select_rows(x, as_rows(kcs)));
  Retrieval r;
  r.aggregated_mastery = ad::matmul(hbar, w_h_);
  r.difficulty = mlp(model_->index().diff, ctx.e_bar);
  r.probability = ad::sigmoid(ad::sub(r.aggregated_mastery, r.difficulty));
  return r;
}

void SequenceRunner::strengthen(QuestionId q, std::span<const KcId> kcs, bool correct) {
  const auto& ctx = context(q, kcs);
  const auto kind = correct ? GnnKind::kGain : GnnKind::kLoss;
  const auto& m = correct ? model_->index().gain : model_->index().loss;
  auto rows = as_rows(kcs);
  std::array<ad::Var, 2> parts{ad::select_rows(h_, rows), repeat_row(ctx.e_bar, rows.size())};
  auto seed = ad::scatter_rows(mlp(m, ad::concat_cols(parts)), rows, n_);
  auto delta = gnn_forward(model_->spec(kind), seed, model_->adjacency(), corr_,
                           weights_[static_cast<std::size_t>(kind)], ctx.alpha);
  h_ = ad::add(h_, delta);
}

void SequenceRunner::learn_forget(QuestionId q, std::span<const KcId> kcs, QuestionId q_next,
                                  std::span<const KcId> kcs_next, double gap_seconds) {
  if (!model_->options().learn_forget) return;
  auto& tape = *h_.tape();
  const auto& now = context(q, kcs);
  const auto& next = context(q_next, kcs_next);

  LearnStep step;
  step.minutes = gap_minutes(gap_seconds);
  std::set_union(kcs.begin(), kcs.end(), kcs_next.begin(), kcs_next.end(), std::back_inserter(step.candidates));
  auto cand_rows = as_rows(step.candidates);
  const std::size_t m = cand_rows.size();
  std::array<ad::Var, 3> parts{ad::select_rows(h_, cand_rows), repeat_row(now.e_bar, m), repeat_row(next.e_bar, m)};
  auto z = ad::concat_cols(parts);
  auto pi = ad::softmax_rows(mlp(model_->index().dcs, z));

  std::vector<std::size_t> learners;
  std::vector<std::size_t> learner_kcs;
  const auto& PI = pi.value();
  for (std::size_t i = 0; i < m; ++i) {
    step.learn_probability.push_back(PI(i, 1));
    const bool learn = PI(i, 1) > PI(i, 0);
    step.decided.push_back(learn);
    if (learn) {
      learners.push_back(i);
      learner_kcs.push_back(cand_rows[i]);
    }
  }

  ad::Var progress;
  if (learners.empty()) {
    progress = tape.constant(Matrix(n_, model_->hyper().memory_dim));
  } else {
    auto p = mlp(model_->index().prg, ad::select_rows(z, learners));
    if (mode_ == Mode::kTrain) p = ad::scale_rows(p, ad::column(ad::select_rows(pi, learners), 1));
    auto seed = ad::scatter_rows(p, learner_kcs, n_);
    Matrix in_now(1, n_), in_next(1, n_), other(1, n_);
    for (std::size_t c = 0; c < n_; ++c) {
      const bool a = std::binary_search(kcs.begin(), kcs.end(), static_cast<KcId>(c));
      const bool b = std::binary_search(kcs_next.begin(), kcs_next.end(), static_cast<KcId>(c));
      (a ? in_now : b ? in_next : other).data[c] = 1.0;
    }
    std::array<ad::Var, 3> alpha_terms{
        ad::hadamard(now.alpha, tape.constant(std::move(in_now))),
        ad::hadamard(next.alpha, tape.constant(std::move(in_next))),
        ad::hadamard(ad::scale(ad::add(now.alpha, next.alpha), 0.5), tape.constant(std::move(other)))};
    auto alpha = ad::add_n(alpha_terms);
    auto i = static_cast<std::size_t>(GnnKind::kProgress);
    progress = gnn_forward(model_->spec(GnnKind::kProgress), seed, model_->adjacency(), corr_, weights_[i], alpha);
  }

  const auto& P = progress.value();
  step.progress = P;
  step.learned.assign(n_, 0);
  std::vector<double> steps(n_);
  for (std::size_t c = 0; c < n_; ++c) {
    auto row = P.row(c);
    step.learned[c] = std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; });
    steps[c] = static_cast<double>(counts_[c] + 1) * step.minutes;
  }
  h_ = ad::learn_forget_update(h_, progress, h0_, learn_rate_, forget_rate_, steps, step.learned);
  for (std::size_t c = 0; c < n_; ++c) counts_[c] += step.learned[c] ? 1 : 0;
  signature_.insert(signature_.end(), step.decided.begin(), step.decided.end());
  signature_.insert(signature_.end(), step.learned.begin(), step.learned.end());
  last_ = std::move(step);
}

std::vector<double> SequenceRunner::mastery() const { return mastery_vector(h_.value(), w_h_.value().data); }

namespace {

// Shared driver for forward_sequence and sequence_gradient.
struct Run {
  SequenceResult result;
  std::vector<ad::Var> losses;
};

Run run_sequence(const GrktModel& model, ParamBinder& binder, const ResponseSequence& seq,
                 const SequenceOptions& opt) {
  Run run;
  SequenceRunner runner(model, binder, opt.mode);
  auto real = seq.real();
  if (opt.trace) {
    run.result.trace.emplace();
    run.result.trace->student = seq.student;
  }
  for (std::size_t t = 0; t < real.size(); ++t) {
    const auto& r = real[t];
    MasteryTrace::Step ts;
    if (opt.trace) ts.pre = runner.mastery();
    auto ret = runner.retrieve(r.question, r.kcs);
    StepOutput out;
    out.prediction = ret.probability.scalar();
    out.aggregated_mastery = ret.aggregated_mastery.scalar();
    out.difficulty = ret.difficulty.scalar();
    auto loss = ad::bce(ret.probability, r.correct ? 1.0 : 0.0);
    run.result.loss_sum += loss.scalar();
    run.losses.push_back(loss);

    runner.strengthen(r.question, r.kcs, r.correct != 0);
    if (opt.trace) ts.post = runner.mastery();
    if (opt.repetition) out.repeat_prediction = runner.retrieve(r.question, r.kcs).probability.scalar();
    if (t + 1 < real.size()) {
      const auto& nx = real[t + 1];
      runner.learn_forget(r.question, r.kcs, nx.question, nx.kcs, static_cast<double>(nx.timestamp - r.timestamp));
      if (opt.trace) ts.after_learning = runner.mastery();
    }
    if (opt.trace) {
      ts.step = t;
      ts.timestamp = r.timestamp;
      ts.question = r.question;
      ts.kcs = r.kcs;
      ts.correct = r.correct;
      ts.predicted = out.prediction;
      run.result.trace->steps.push_back(std::move(ts));
    }
    run.result.steps.push_back(out);
  }
  run.result.signature = runner.signature();
  return run;
}

}  // namespace

SequenceResult forward_sequence(const GrktModel& model, const ResponseSequence& seq, const SequenceOptions& opt) {
  ad::Tape tape;
  tape.set_grad_enabled(false);
  ParamBinder binder(tape, model.store());
  return run_sequence(model, binder, seq, opt).result;
}

SequenceGradient sequence_gradient(const GrktModel& model, const ResponseSequence& seq, double scale, Mode mode) {
  ad::Tape tape;
  ParamBinder binder(tape, model.store());
  SequenceOptions opt;
  opt.mode = mode;
  auto run = run_sequence(model, binder, seq, opt);
  SequenceGradient g;
  g.loss_sum = run.result.loss_sum;
  g.count = run.losses.size();
  g.signature = std::move(run.result.signature);
  if (run.losses.empty()) {
    g.grads = Gradients(model.store().size());
    return g;
  }
  tape.backward(ad::add_n(run.losses), scale);
  g.grads = binder.collect();
  return g;
}

double predict_next(const GrktModel& model, std::span<const Response> history, QuestionId q,
                    std::span<const KcId> kcs, std::int64_t timestamp) {
  ad::Tape tape;
  tape.set_grad_enabled(false);
  ParamBinder binder(tape, model.store());
  SequenceRunner runner(model, binder, Mode::kEval);
  for (std::size_t t = 0; t < history.size(); ++t) {
    const auto& r = history[t];
    runner.strengthen(r.question, r.kcs, r.correct != 0);
    const bool last = t + 1 == history.size();
    const QuestionId nq = last ? q : history[t + 1].question;
    const auto nk = last ? kcs : std::span<const KcId>(history[t + 1].kcs);
    const std::int64_t nt = last ? timestamp : history[t + 1].timestamp;
    runner.learn_forget(r.question, r.kcs, nq, nk, static_cast<double>(nt - r.timestamp));
  }
  return runner.retrieve(q, kcs).probability.scalar();
}

}  // namespace grkt
