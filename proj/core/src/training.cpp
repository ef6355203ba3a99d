#include "grkt/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "grkt/errors.hpp"
#include "json.hpp"

namespace grkt {

std::string Ablation::name() const {
  if (!no_learn_forget && !no_similarity && !no_prerequisite) return "GRKT";
  std::string s;
  if (no_learn_forget) s += "-LF";
  if (no_similarity) s += "-SIM";
  if (no_prerequisite) s += "-PRE";
  return s;
}

KcRelationGraphs apply_ablation(const KcRelationGraphs& g, const Ablation& a) {
  KcRelationGraphs out = g;
  if (a.no_similarity) out = out.without_similarity();
  if (a.no_prerequisite) out = out.without_prerequisite();
  return out;
}

void TrainConfig::validate() const {
  hyper.validate();
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (min_cooccurrence == 0) throw ConfigError("min_cooccurrence must be at least 1");
  if (seq_len == 0 || min_len > seq_len) throw ConfigError("need 0 < min_len <= seq_len");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (!(val_frac >= 0.0 && val_frac < 1.0)) throw ConfigError("val_frac must lie in [0, 1)");
  if (threads == 0) throw ConfigError("threads must be positive");
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v, std::size_t line) {
  std::istringstream is(v);
  T x{};
  is >> x;
  if (!is || !is.eof()) throw ParseError("bad value '" + v + "' for " + key, line);
  return x;
}

bool parse_bool(const std::string& key, const std::string& v, std::size_t line) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ParseError("bad boolean '" + v + "' for " + key, line);
}

}  // namespace

TrainConfig parse_config(std::istream& in, TrainConfig cfg) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    auto text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line);
    auto key = trim(text.substr(0, eq));
    auto v = trim(text.substr(eq + 1));
    auto& h = cfg.hyper;
    if (key == "embed_dim") h.embed_dim = parse_number<std::size_t>(key, v, line);
    else if (key == "memory_dim") h.memory_dim = parse_number<std::size_t>(key, v, line);
    else if (key == "hidden_dim") h.hidden_dim = parse_number<std::size_t>(key, v, line);
    else if (key == "layers") h.layers = parse_number<std::size_t>(key, v, line);
    else if (key == "learning_rate") h.learning_rate = parse_number<double>(key, v, line);
    else if (key == "l2") h.l2 = parse_number<double>(key, v, line);
    else if (key == "eta") h.eta = parse_number<double>(key, v, line);
    else if (key == "seed") h.seed = parse_number<std::uint64_t>(key, v, line);
    else if (key == "batch_size") h.batch_size = parse_number<std::size_t>(key, v, line);
    else if (key == "patience") h.patience = parse_number<std::size_t>(key, v, line);
    else if (key == "max_epochs") cfg.max_epochs = parse_number<std::size_t>(key, v, line);
    else if (key == "min_cooccurrence") cfg.min_cooccurrence = parse_number<std::size_t>(key, v, line);
    else if (key == "seq_len") cfg.seq_len = parse_number<std::size_t>(key, v, line);
    else if (key == "min_len") cfg.min_len = parse_number<std::size_t>(key, v, line);
    else if (key == "folds") cfg.folds = parse_number<std::size_t>(key, v, line);
    else if (key == "val_frac") cfg.val_frac = parse_number<double>(key, v, line);
    else if (key == "threads") cfg.threads = parse_number<std::size_t>(key, v, line);
    else if (key == "no_lf") cfg.ablation.no_learn_forget = parse_bool(key, v, line);
    else if (key == "no_sim") cfg.ablation.no_similarity = parse_bool(key, v, line);
    else if (key == "no_pre") cfg.ablation.no_prerequisite = parse_bool(key, v, line);
    else if (key == "graphs_from_full_dataset") cfg.graphs_from_full_dataset = parse_bool(key, v, line);
    else throw ParseError("unknown config key '" + key + "'", line);
  }
  return cfg;
}

TrainConfig read_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& out, const TrainConfig& cfg) {
  const auto& h = cfg.hyper;
  out << std::setprecision(17);
  out << "embed_dim = " << h.embed_dim << "\nmemory_dim = " << h.memory_dim << "\nhidden_dim = " << h.hidden_dim
      << "\nlayers = " << h.layers << "\nlearning_rate = " << h.learning_rate << "\nl2 = " << h.l2
      << "\neta = " << h.eta << "\nseed = " << h.seed << "\nbatch_size = " << h.batch_size
      << "\npatience = " << h.patience << "\nmax_epochs = " << cfg.max_epochs
      << "\nmin_cooccurrence = " << cfg.min_cooccurrence << "\nseq_len = " << cfg.seq_len
      << "\nmin_len = " << cfg.min_len << "\nfolds = " << cfg.folds << "\nval_frac = " << cfg.val_frac
      << "\nthreads = " << cfg.threads << "\nno_lf = " << cfg.ablation.no_learn_forget
      << "\nno_sim = " << cfg.ablation.no_similarity << "\nno_pre = " << cfg.ablation.no_prerequisite
      << "\ngraphs_from_full_dataset = " << cfg.graphs_from_full_dataset << '\n';
}

double bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels,
                std::span<const std::uint8_t> mask) {
  if (predictions.size() != labels.size() || (!mask.empty() && mask.size() != labels.size()))
    throw Error("bce_loss: length mismatch");
  constexpr double eps = 1e-7;
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const double p = std::clamp(predictions[i], eps, 1.0 - eps);
    sum -= labels[i] ? std::log(p) : std::log1p(-p);
    ++n;
  }
  if (n == 0) throw Error("bce_loss: no unmasked predictions");
  return sum / static_cast<double>(n);
}

namespace {

// Calls fn(i) for i in [0, n) on up to `threads` workers; results land in
// caller-owned slots so reductions stay in index order.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::size_t> all_indices(const Dataset& ds, std::span<const std::size_t> sequences) {
  if (!sequences.empty()) return {sequences.begin(), sequences.end()};
  std::vector<std::size_t> v(ds.sequences.size());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

Evaluation evaluate_impl(const GrktModel& model, const Dataset& ds, const std::vector<std::size_t>& idx,
                         ConsistencyRule rule, std::size_t threads) {
  std::vector<SequenceResult> results(idx.size());
  SequenceOptions opt;
  opt.trace = true;
  opt.repetition = true;
  parallel_for(idx.size(), threads, [&](std::size_t i) {
    results[i] = forward_sequence(model, ds.sequences.at(idx[i]), opt);
  });
  std::vector<double> preds, repeats;
  std::vector<std::uint8_t> labels;
  std::vector<EvalRecord> records;
  ConsistencyAccumulator cons(rule);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto real = ds.sequences[idx[i]].real();
    const auto& res = results[i];
    for (std::size_t t = 0; t < real.size(); ++t) {
      const auto& s = res.steps[t];
      preds.push_back(s.prediction);
      repeats.push_back(*s.repeat_prediction);
      labels.push_back(real[t].correct);
      records.push_back({s.prediction, real[t].correct, real[t].question, s.aggregated_mastery});
      const auto& ts = res.trace->steps[t];
      cons.add_step(ts.kcs, ts.pre, ts.post);
    }
  }
  Evaluation ev;
  ev.metrics.responses = preds.size();
  if (preds.empty()) return ev;
  ev.metrics.auc = auc(preds, labels);
  ev.metrics.acc = accuracy(preds, labels);
  ev.metrics.consistency = cons.value();
  ev.metrics.gaucm = gaucm(records);
  ev.metrics.repetition = repetition(repeats, labels);
  ev.loss = bce_loss(preds, labels);
  return ev;
}

}  // namespace

Evaluation evaluate(const GrktModel& model, const Dataset& ds, std::span<const std::size_t> sequences,
                    ConsistencyRule rule) {
  return evaluate_impl(model, ds, all_indices(ds, sequences), rule, 1);
}

KcRelationGraphs graphs_for_fold(const Dataset& ds, const FoldSplit& fold, const TrainConfig& cfg) {
  GraphBuildConfig g;
  g.eta = cfg.hyper.eta;
  g.min_cooccurrence = cfg.min_cooccurrence;
  auto mined = cfg.graphs_from_full_dataset ? build_graphs(ds, g) : build_graphs(ds.subset(fold.train), g);
  return apply_ablation(mined, cfg.ablation);
}

TrainResult train_fold(const Dataset& ds, const FoldSplit& fold, const TrainConfig& cfg, const KcRelationGraphs& graphs,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  if (fold.train.empty()) throw ConfigError("fold has no training sequences");
  auto store = init_parameters(ds.num_questions(), ds.num_kcs(), cfg.hyper);
  ModelOptions mopt;
  mopt.learn_forget = !cfg.ablation.no_learn_forget;
  GrktModel model(store, graphs, mopt);
  AdamConfig adam;
  adam.learning_rate = cfg.hyper.learning_rate;
  adam.l2 = cfg.hyper.l2;

  TrainResult result{store, model.graphs(), {}};
  auto& report = result.report;
  report.fold = fold.fold;
  report.variant = cfg.ablation.name();
  std::mt19937_64 rng(cfg.hyper.seed + 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order = fold.train;
  const std::vector<std::size_t>& val = fold.validation.empty() ? fold.train : fold.validation;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0, batch = 0; b < order.size(); b += cfg.hyper.batch_size, ++batch) {
      const std::size_t e = std::min(order.size(), b + cfg.hyper.batch_size);
      std::size_t steps = 0;
      for (std::size_t i = b; i < e; ++i) steps += ds.sequences[order[i]].valid_len;
      if (steps == 0) continue;
      const double scale = 1.0 / static_cast<double>(steps);
      std::vector<SequenceGradient> grads(e - b);
      parallel_for(e - b, cfg.threads, [&](std::size_t i) {
        grads[i] = sequence_gradient(model, ds.sequences[order[b + i]], scale, Mode::kTrain);
      });
      store.zero_grad();
      double batch_loss = 0;
      for (const auto& g : grads) {
        g.grads.accumulate_into(store);
        batch_loss += g.loss_sum;
      }
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch));
      loss_sum += batch_loss;
      loss_count += steps;
      adam_step(store, adam);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    auto ev = evaluate_impl(model, ds, val, ConsistencyRule::kDecline, cfg.threads);
    log.val_auc = ev.metrics.auc;
    log.val_acc = ev.metrics.acc;
    report.epochs.push_back(log);
    if (on_epoch) on_epoch(log);

    const bool improved =
        epoch == 0 || (log.val_auc && (!report.best_val_auc || *log.val_auc > *report.best_val_auc));
    if (improved) {
      report.best_epoch = epoch;
      report.best_val_auc = log.val_auc;
      result.params = store;
      since_best = 0;
    } else if (++since_best >= std::max<std::size_t>(cfg.hyper.patience, 1)) {
      report.stop_reason = "no validation improvement for " + std::to_string(since_best) + " epochs";
      break;
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "reached max_epochs";

  GrktModel best(result.params, model.graphs(), mopt);
  if (!fold.test.empty()) report.test = evaluate_impl(best, ds, fold.test, ConsistencyRule::kDecline, cfg.threads);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

CrossValidationReport cross_validate(const Dataset& ds, const TrainConfig& cfg,
                                     const std::optional<KcRelationGraphs>& graphs,
                                     std::span<const std::size_t> fold_ids, const EpochCallback& on_epoch) {
  cfg.validate();
  auto folds = make_folds(ds, cfg.folds, cfg.val_frac, cfg.hyper.seed);
  std::vector<std::size_t> ids(fold_ids.begin(), fold_ids.end());
  if (ids.empty()) {
    ids.resize(folds.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
  }
  std::vector<TrainReport> reports;
  for (auto f : ids) {
    if (f >= folds.size()) throw ConfigError("fold " + std::to_string(f) + " out of range");
    auto g = graphs ? apply_ablation(*graphs, cfg.ablation) : graphs_for_fold(ds, folds[f], cfg);
    reports.push_back(train_fold(ds, folds[f], cfg, g, on_epoch).report);
  }
  return summarize(std::move(reports));
}

CrossValidationReport summarize(std::vector<TrainReport> folds) {
  CrossValidationReport out;
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : folds) {
    if (!r.test) continue;
    const auto& m = r.test->metrics;
    if (m.auc) values["auc"].push_back(*m.auc);
    values["acc"].push_back(m.acc);
    values["consistency"].push_back(m.consistency);
    if (m.gaucm) values["gaucm"].push_back(*m.gaucm);
    values["repetition"].push_back(m.repetition);
  }
  out.folds = std::move(folds);
  for (const auto& [k, v] : values) {
    MetricSummary s;
    s.count = v.size();
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out.summary[k] = s;
  }
  return out;
}

namespace {

using nlohmann::json;

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json config_json(const TrainConfig& c) {
  const auto& h = c.hyper;
  return {{"embed_dim", h.embed_dim},
          {"memory_dim", h.memory_dim},
          {"hidden_dim", h.hidden_dim},
          {"layers", h.layers},
          {"learning_rate", h.learning_rate},
          {"l2", h.l2},
          {"eta", h.eta},
          {"seed", h.seed},
          {"batch_size", h.batch_size},
          {"patience", h.patience},
          {"max_epochs", c.max_epochs},
          {"min_cooccurrence", c.min_cooccurrence},
          {"seq_len", c.seq_len},
          {"min_len", c.min_len},
          {"folds", c.folds},
          {"val_frac", c.val_frac},
          {"threads", c.threads},
          {"variant", c.ablation.name()},
          {"no_lf", c.ablation.no_learn_forget},
          {"no_sim", c.ablation.no_similarity},
          {"no_pre", c.ablation.no_prerequisite},
          {"graphs_from_full_dataset", c.graphs_from_full_dataset}};
}

json metrics_json(const MetricReport& m) {
  return {{"auc", opt_json(m.auc)},
          {"acc", m.acc},
          {"consistency", m.consistency},
          {"gaucm", opt_json(m.gaucm)},
          {"repetition", m.repetition},
          {"responses", m.responses}};
}

json report_json(const TrainReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_auc", opt_json(e.val_auc)},
                      {"val_acc", e.val_acc}});
  json j{{"fold", r.fold},
         {"variant", r.variant},
         {"epochs", epochs},
         {"best_epoch", r.best_epoch},
         {"best_val_auc", opt_json(r.best_val_auc)},
         {"seconds", r.seconds},
         {"stop_reason", r.stop_reason}};
  if (r.test) {
    j["test"] = metrics_json(r.test->metrics);
    j["test"]["loss"] = r.test->loss;
  } else {
    j["test"] = nullptr;
  }
  return j;
}

}  // namespace

std::string to_json(const TrainConfig& cfg) { return config_json(cfg).dump(2); }
std::string to_json(const MetricReport& m) { return metrics_json(m).dump(2); }
std::string to_json(const TrainReport& r) { return report_json(r).dump(2); }

std::string to_json(const CrossValidationReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds) folds.push_back(report_json(f));
  json summary = json::object();
  for (const auto& [k, s] : r.summary) summary[k] = {{"mean", s.mean}, {"std", s.std}, {"folds", s.count}};
  return json{{"folds", folds}, {"summary", summary}}.dump(2);
}

}  // namespace grkt
