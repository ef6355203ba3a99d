#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grkt/data.hpp"
#include "grkt/errors.hpp"
#include "grkt/gradcheck.hpp"
#include "grkt/graph.hpp"
#include "grkt/model.hpp"
#include "grkt/params.hpp"
#include "grkt/synth.hpp"
#include "grkt/trace.hpp"
#include "grkt/training.hpp"
#include "json.hpp"

namespace grkt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string config;
};

struct DataFlags {
  std::string path;
  ColumnSchema schema;
  std::string delimiter = ",";
  std::string kc_delimiter = ";";

  ColumnSchema resolved() const {
    auto s = schema;
    if (delimiter.size() != 1 || kc_delimiter.size() != 1) throw UsageError("delimiters must be single characters");
    s.delimiter = delimiter == "\\t" ? '\t' : delimiter[0];
    s.kc_delimiter = kc_delimiter[0];
    return s;
  }
};

struct ModelFlags {
  std::string graphs;
  std::string checkpoint;
  std::string fold = "0";
  bool no_lf = false, no_sim = false, no_pre = false;
};

std::string default_out() {
  if (const char* env = std::getenv("GRKT_OUT"); env && *env) return env;
  return "grkt_out";
}

void add_data_flags(CLI::App* c, DataFlags& d, bool required) {
  auto* opt = c->add_option("--data", d.path, "Response log (.csv) or exported dataset");
  if (required) opt->required();
  c->add_option("--col-student", d.schema.student, "Student column")->capture_default_str();
  c->add_option("--col-question", d.schema.question, "Question column")->capture_default_str();
  c->add_option("--col-kcs", d.schema.kcs, "KC list column")->capture_default_str();
  c->add_option("--col-correct", d.schema.correct, "Correctness column")->capture_default_str();
  c->add_option("--col-timestamp", d.schema.timestamp, "Timestamp column (seconds)")->capture_default_str();
  c->add_option("--delimiter", d.delimiter, "Field delimiter (\\t for tab)")->capture_default_str();
  c->add_option("--kc-delimiter", d.kc_delimiter, "Delimiter inside the KC column")->capture_default_str();
  c->add_flag("--timestamp-is-order", d.schema.timestamp_is_order, "Timestamp column only orders rows");
  c->add_flag("--skip-missing-kcs", d.schema.skip_rows_without_kcs, "Drop rows with an empty KC field");
}

void add_common(CLI::App* c, Common& common) {
  c->add_option("--out", common.out, "Output directory (default $GRKT_OUT or ./grkt_out)");
  c->add_option("--seed", common.seed, "Seed overriding the config");
  c->add_option("--config", common.config, "key = value training config");
}

void add_ablation(CLI::App* c, ModelFlags& m) {
  c->add_flag("--no-lf", m.no_lf, "Disable learning/forgetting (-LF)");
  c->add_flag("--no-sim", m.no_sim, "Drop similarity edges (-SIM)");
  c->add_flag("--no-pre", m.no_pre, "Drop prerequisite edges (-PRE)");
}

fs::path out_dir(const Common& c) {
  fs::path p = c.out.empty() ? default_out() : c.out;
  fs::create_directories(p);
  return p;
}

TrainConfig load_config(const Common& c, const ModelFlags* m, const fs::path& fallback = {}) {
  TrainConfig cfg;
  if (!c.config.empty()) cfg = read_config(c.config);
  else if (!fallback.empty() && fs::exists(fallback)) cfg = read_config(fallback);
  if (c.seed) cfg.hyper.seed = *c.seed;
  if (m) {
    cfg.ablation.no_learn_forget = cfg.ablation.no_learn_forget || m->no_lf;
    cfg.ablation.no_similarity = cfg.ablation.no_similarity || m->no_sim;
    cfg.ablation.no_prerequisite = cfg.ablation.no_prerequisite || m->no_pre;
  }
  cfg.validate();
  return cfg;
}

Dataset load_data(const DataFlags& d, const TrainConfig& cfg) {
  auto raw = load_any(d.path, d.resolved());
  return preprocess(raw, cfg.seq_len, cfg.min_len);
}

std::vector<std::size_t> parse_folds(const std::string& spec, std::size_t k) {
  std::vector<std::size_t> ids;
  if (spec == "all") {
    for (std::size_t f = 0; f < k; ++f) ids.push_back(f);
    return ids;
  }
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(spec, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != spec.size() || spec.empty()) throw UsageError("--fold expects an index or 'all', got '" + spec + "'");
  if (v >= k) throw UsageError("--fold " + spec + " out of range for " + std::to_string(k) + " folds");
  return {static_cast<std::size_t>(v)};
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct Manifest {
  json doc;

  Manifest(const std::string& command, const std::vector<std::string>& args) {
    doc["command"] = command;
    doc["argv"] = args;
    doc["tool_version"] = kToolVersion;
    doc["created"] = timestamp_utc();
    doc["formats"] = {{"dataset", kDatasetFormatVersion},
                      {"graphs", kGraphFormatVersion},
                      {"checkpoint", kCheckpointFormatVersion},
                      {"trace", 1}};
    doc["outputs"] = json::array();
  }
  void output(const fs::path& p) { doc["outputs"].push_back(p.string()); }
  void write(const fs::path& dir) const {
    std::ofstream f(dir / "manifest.json");
    f << doc.dump(2) << '\n';
    if (!f) throw Error("cannot write manifest in " + dir.string());
  }
};

template <class F>
void write_file(const fs::path& p, F fn) {
  std::ofstream f(p);
  if (!f) throw Error("cannot open " + p.string() + " for writing");
  fn(f);
  if (!f) throw Error("write failed for " + p.string());
}

json config_snapshot(const TrainConfig& cfg) { return json::parse(to_json(cfg)); }

// --- commands --------------------------------------------------------------

int cmd_synth(const Common& common, SynthConfig sc, Manifest& mf, std::ostream& out) {
  if (common.seed) sc.seed = *common.seed;
  auto dir = out_dir(common);
  auto res = generate(sc);
  write_file(dir / "data.csv", [&](std::ostream& f) { f << res.csv; });
  write_file(dir / "truth.json", [&](std::ostream& f) { write_truth_json(f, sc, res); });
  write_file(dir / "planted_graphs.tsv", [&](std::ostream& f) { write_graphs(f, res.planted); });
  mf.output(dir / "data.csv");
  mf.output(dir / "truth.json");
  mf.output(dir / "planted_graphs.tsv");
  std::ostringstream truth;
  write_truth_json(truth, sc, res);
  mf.doc["seed"] = sc.seed;
  mf.doc["config"] = json::parse(truth.str())["config"];
  mf.write(dir);
  out << "synth: " << res.dataset.num_students() << " students, " << res.dataset.num_responses() << " responses -> "
      << (dir / "data.csv").string() << '\n';
  return kExitOk;
}

int cmd_build_graphs(const Common& common, const DataFlags& data, const std::optional<std::string>& fold,
                     std::optional<double> eta, std::optional<std::size_t> min_co, Manifest& mf, std::ostream& out) {
  auto cfg = load_config(common, nullptr);
  if (eta) cfg.hyper.eta = *eta;
  if (min_co) cfg.min_cooccurrence = *min_co;
  cfg.validate();
  auto dir = out_dir(common);
  auto ds = load_data(data, cfg);
  GraphBuildConfig gc;
  gc.eta = cfg.hyper.eta;
  gc.min_cooccurrence = cfg.min_cooccurrence;
  KcRelationGraphs g;
  if (fold) {
    auto ids = parse_folds(*fold, cfg.folds);
    if (ids.size() != 1) throw UsageError("build-graphs takes a single --fold");
    auto folds = make_folds(ds, cfg.folds, cfg.val_frac, cfg.hyper.seed);
    g = build_graphs(ds.subset(folds[ids[0]].train), gc);
    mf.doc["fold"] = ids[0];
  } else {
    g = build_graphs(ds, gc);
  }
  write_file(dir / "graphs.tsv", [&](std::ostream& f) { write_graphs(f, g); });
  mf.output(dir / "graphs.tsv");
  mf.doc["seed"] = cfg.hyper.seed;
  mf.doc["config"] = config_snapshot(cfg);
  mf.doc["data"] = data.path;
  mf.doc["edges"] = {{"P", g.num_edges(Relation::kPrerequisite)}, {"R", g.num_edges(Relation::kSimilar) / 2}};
  mf.write(dir);
  out << "build-graphs: " << g.num_edges(Relation::kPrerequisite) << " prerequisite, "
      << g.num_edges(Relation::kSimilar) / 2 << " similarity edges over " << g.num_kcs() << " KCs\n";
  return kExitOk;
}

int cmd_train(const Common& common, const DataFlags& data, const ModelFlags& mflags, std::optional<std::size_t> epochs,
              std::optional<std::size_t> threads, Manifest& mf, std::ostream& out) {
  auto cfg = load_config(common, &mflags);
  if (epochs) cfg.max_epochs = *epochs;
  if (threads) cfg.threads = *threads;
  cfg.validate();
  auto dir = out_dir(common);
  auto ds = load_data(data, cfg);
  std::optional<KcRelationGraphs> given;
  if (!mflags.graphs.empty()) given = read_graphs(mflags.graphs);
  auto folds = make_folds(ds, cfg.folds, cfg.val_frac, cfg.hyper.seed);
  auto ids = parse_folds(mflags.fold, cfg.folds);

  write_file(dir / "config.txt", [&](std::ostream& f) { write_config(f, cfg); });
  mf.output(dir / "config.txt");
  std::vector<TrainReport> reports;
  for (auto f : ids) {
    auto graphs = given ? apply_ablation(*given, cfg.ablation) : graphs_for_fold(ds, folds[f], cfg);
    out << "fold " << f << " (" << cfg.ablation.name() << "): " << folds[f].train.size() << " train, "
        << folds[f].validation.size() << " validation, " << folds[f].test.size() << " test sequences\n";
    auto res = train_fold(ds, folds[f], cfg, graphs, [&](const EpochLog& e) {
      out << "  epoch " << e.epoch << " loss " << std::fixed << std::setprecision(4) << e.train_loss << " val_auc ";
      if (e.val_auc) out << *e.val_auc;
      else out << "n/a";
      out << std::defaultfloat << '\n' << std::flush;
    });
    auto fdir = dir / ("fold" + std::to_string(f));
    fs::create_directories(fdir);
    write_checkpoint(fdir / "checkpoint.json", res.params);
    write_graphs(fdir / "graphs.tsv", res.graphs);
    write_file(fdir / "config.txt", [&](std::ostream& o) { write_config(o, cfg); });
    mf.output(fdir / "checkpoint.json");
    mf.output(fdir / "graphs.tsv");
    mf.output(fdir / "config.txt");
    if (res.report.test && res.report.test->metrics.auc)
      out << "  test auc " << std::fixed << std::setprecision(4) << *res.report.test->metrics.auc << std::defaultfloat
          << " (" << res.report.stop_reason << ")\n";
    reports.push_back(std::move(res.report));
  }
  auto cv = summarize(std::move(reports));
  write_file(dir / "report.json", [&](std::ostream& f) { f << to_json(cv) << '\n'; });
  mf.output(dir / "report.json");
  mf.doc["seed"] = cfg.hyper.seed;
  mf.doc["config"] = config_snapshot(cfg);
  mf.doc["data"] = data.path;
  mf.doc["folds"] = ids;
  if (given) mf.doc["graphs"] = mflags.graphs;
  mf.write(dir);
  return kExitOk;
}

struct LoadedModel {
  TrainConfig cfg;
  ParameterStore store;
  KcRelationGraphs graphs;
};

LoadedModel load_model(const Common& common, const ModelFlags& mflags) {
  const fs::path ckpt = mflags.checkpoint;
  if (!fs::exists(ckpt)) throw Error("checkpoint not found: " + ckpt.string());
  LoadedModel m{load_config(common, &mflags, ckpt.parent_path() / "config.txt"), read_checkpoint(ckpt), {}};
  const fs::path gpath = mflags.graphs.empty() ? ckpt.parent_path() / "graphs.tsv" : fs::path(mflags.graphs);
  if (!fs::exists(gpath)) throw Error("graphs not found: " + gpath.string() + " (pass --graphs)");
  m.graphs = apply_ablation(read_graphs(gpath), m.cfg.ablation);
  return m;
}

void check_compatible(const LoadedModel& m, const Dataset& ds) {
  if (m.store.num_questions != ds.num_questions() || m.store.num_kcs != ds.num_kcs())
    throw ConfigError("checkpoint has " + std::to_string(m.store.num_questions) + " questions / " +
                      std::to_string(m.store.num_kcs) + " KCs but the data has " +
                      std::to_string(ds.num_questions()) + " / " + std::to_string(ds.num_kcs()));
}

int cmd_eval(const Common& common, const DataFlags& data, const ModelFlags& mflags, const std::string& rule_name,
             Manifest& mf, std::ostream& out) {
  auto m = load_model(common, mflags);
  auto dir = out_dir(common);
  auto ds = load_data(data, m.cfg);
  check_compatible(m, ds);
  ConsistencyRule rule = rule_name == "non-increase" ? ConsistencyRule::kNonIncrease : ConsistencyRule::kDecline;
  std::vector<std::size_t> seqs;
  if (mflags.fold != "all") {
    auto ids = parse_folds(mflags.fold, m.cfg.folds);
    seqs = make_folds(ds, m.cfg.folds, m.cfg.val_frac, m.cfg.hyper.seed)[ids[0]].test;
    mf.doc["fold"] = ids[0];
  }
  GrktModel model(m.store, m.graphs, {.learn_forget = !m.cfg.ablation.no_learn_forget});
  auto ev = evaluate(model, ds, seqs, rule);
  json doc = json::parse(to_json(ev.metrics));
  doc["loss"] = ev.loss;
  doc["variant"] = m.cfg.ablation.name();
  doc["consistency_rule"] = rule == ConsistencyRule::kDecline ? "decline" : "non-increase";
  write_file(dir / "eval.json", [&](std::ostream& f) { f << doc.dump(2) << '\n'; });
  mf.output(dir / "eval.json");
  mf.doc["seed"] = m.cfg.hyper.seed;
  mf.doc["config"] = config_snapshot(m.cfg);
  mf.doc["checkpoint"] = mflags.checkpoint;
  mf.doc["data"] = data.path;
  mf.write(dir);
  out << "eval: " << ev.metrics.responses << " responses, auc ";
  if (ev.metrics.auc) out << std::fixed << std::setprecision(4) << *ev.metrics.auc;
  else out << "n/a";
  out << std::fixed << std::setprecision(4) << " acc " << ev.metrics.acc << " consistency " << ev.metrics.consistency
      << std::defaultfloat << '\n';
  return kExitOk;
}

int cmd_trace(const Common& common, const DataFlags& data, const ModelFlags& mflags, const std::string& student,
              Manifest& mf, std::ostream& out) {
  auto m = load_model(common, mflags);
  auto dir = out_dir(common);
  auto ds = load_data(data, m.cfg);
  check_compatible(m, ds);
  std::optional<StudentId> sid;
  if (!student.empty()) {
    sid = ds.students.find(student);
    if (!sid) throw Error("student '" + student + "' not found in the data");
  }
  GrktModel model(m.store, m.graphs, {.learn_forget = !m.cfg.ablation.no_learn_forget});
  std::vector<MasteryTrace> traces;
  SequenceOptions opt;
  opt.trace = true;
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    if (sid && ds.sequences[i].student != *sid) continue;
    auto res = forward_sequence(model, ds.sequences[i], opt);
    res.trace->sequence = i;
    traces.push_back(std::move(*res.trace));
  }
  if (traces.empty()) throw Error("no sequences to trace");
  const std::string stem = student.empty() ? "trace" : "trace_" + student;
  write_file(dir / (stem + ".csv"), [&](std::ostream& f) { write_trace_csv(f, traces, &ds); });
  write_file(dir / (stem + "_full.csv"), [&](std::ostream& f) { write_full_channel_csv(f, traces, &ds); });
  write_file(dir / (stem + ".json"), [&](std::ostream& f) { write_trace_json(f, traces, &ds); });
  for (const char* suffix : {".csv", "_full.csv", ".json"}) mf.output(dir / (stem + suffix));
  mf.doc["seed"] = m.cfg.hyper.seed;
  mf.doc["config"] = config_snapshot(m.cfg);
  mf.doc["checkpoint"] = mflags.checkpoint;
  mf.doc["data"] = data.path;
  if (!student.empty()) mf.doc["student"] = student;
  mf.write(dir);
  out << "trace: " << traces.size() << " sequences -> " << (dir / (stem + ".csv")).string() << '\n';
  return kExitOk;
}

int cmd_gradcheck(const Common& common, DeskGradCheckConfig gc, Manifest& mf, std::ostream& out) {
  if (common.seed) gc.hyper.seed = *common.seed;
  auto dir = out_dir(common);
  auto rep = desk_grad_check(gc);
  json groups = json::array();
  for (const auto& g : rep.groups)
    groups.push_back({{"name", g.name}, {"checked", g.checked}, {"skipped", g.skipped}, {"max_rel_error", g.max_rel_error}});
  json doc{{"checked", rep.checked},
           {"skipped", rep.skipped},
           {"max_rel_error", rep.max_rel_error},
           {"tolerance", gc.check.tolerance},
           {"step", gc.check.step},
           {"passed", rep.passed},
           {"groups", groups}};
  write_file(dir / "gradcheck.json", [&](std::ostream& f) { f << doc.dump(2) << '\n'; });
  mf.output(dir / "gradcheck.json");
  mf.doc["seed"] = gc.hyper.seed;
  mf.doc["config"] = {{"samples", gc.check.samples}, {"step", gc.check.step}, {"tolerance", gc.check.tolerance},
                      {"num_kcs", gc.num_kcs}, {"seq_len", gc.seq_len}, {"num_sequences", gc.num_sequences}};
  mf.write(dir);
  out << "gradcheck: " << rep.checked << " coordinates, " << rep.skipped << " skipped, max relative error "
      << std::scientific << std::setprecision(3) << rep.max_rel_error << std::defaultfloat
      << (rep.passed ? " PASS" : " FAIL") << '\n';
  return rep.passed ? kExitOk : kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-based relational knowledge tracing", "grkt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common common;
  DataFlags data;
  ModelFlags mflags;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic response log with planted KC relations");
  SynthConfig sc;
  add_common(synth, common);
  synth->add_option("--students", sc.num_students)->capture_default_str();
  synth->add_option("--kcs", sc.num_kcs)->capture_default_str();
  synth->add_option("--questions", sc.num_questions)->capture_default_str();
  synth->add_option("--min-len", sc.min_length)->capture_default_str();
  synth->add_option("--max-len", sc.max_length)->capture_default_str();
  synth->add_option("--transfer", sc.transfer)->capture_default_str();
  synth->add_option("--decay", sc.decay_per_day, "Mastery decay per day")->capture_default_str();

  auto* build = app.add_subcommand("build-graphs", "Mine prerequisite and similarity graphs from a log");
  add_common(build, common);
  add_data_flags(build, data, true);
  std::optional<std::string> build_fold;
  std::optional<double> eta;
  std::optional<std::size_t> min_co;
  build->add_option("--fold", build_fold, "Mine from this fold's training split only");
  build->add_option("--eta", eta, "Edge threshold");
  build->add_option("--min-cooccurrence", min_co, "Minimum pair count");

  auto* train = app.add_subcommand("train", "Train GRKT on one fold or all folds");
  add_common(train, common);
  add_data_flags(train, data, true);
  add_ablation(train, mflags);
  train->add_option("--graphs", mflags.graphs, "Use these graphs instead of mining per fold");
  train->add_option("--fold", mflags.fold, "Fold index or 'all'")->capture_default_str();
  std::optional<std::size_t> epochs, threads;
  train->add_option("--epochs", epochs, "Maximum epochs");
  train->add_option("--threads", threads, "Worker threads");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; the checkpoint is only read");
  add_common(eval, common);
  add_data_flags(eval, data, true);
  add_ablation(eval, mflags);
  eval->add_option("--checkpoint", mflags.checkpoint, "checkpoint.json written by train")->required();
  eval->add_option("--graphs", mflags.graphs, "Graphs (default: graphs.tsv next to the checkpoint)");
  std::string eval_fold = "all";
  eval->add_option("--fold", eval_fold, "Evaluate this fold's test split, or 'all' sequences")->capture_default_str();
  std::string rule = "decline";
  eval->add_option("--consistency-rule", rule, "decline | non-increase")
      ->check(CLI::IsMember({"decline", "non-increase"}))
      ->capture_default_str();

  auto* trace = app.add_subcommand("trace", "Export per-KC mastery curves");
  add_common(trace, common);
  add_data_flags(trace, data, true);
  add_ablation(trace, mflags);
  trace->add_option("--checkpoint", mflags.checkpoint, "checkpoint.json written by train")->required();
  trace->add_option("--graphs", mflags.graphs, "Graphs (default: graphs.tsv next to the checkpoint)");
  std::string student;
  trace->add_option("--student", student, "Student id as written in the log (default: everyone)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  add_common(gradcheck, common);
  DeskGradCheckConfig gc;
  gradcheck->add_option("--samples", gc.check.samples)->capture_default_str();
  gradcheck->add_option("--tolerance", gc.check.tolerance)->capture_default_str();
  gradcheck->add_option("--step", gc.check.step)->capture_default_str();

  if (args.size() <= 1) {
    err << app.help();
    return kExitUsage;
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\nRun 'grkt --help' for usage.\n";
    return kExitUsage;
  }

  auto* sub = app.get_subcommands().front();
  Manifest mf(sub->get_name(), args);
  try {
    if (sub == synth) return cmd_synth(common, sc, mf, out);
    if (sub == build) return cmd_build_graphs(common, data, build_fold, eta, min_co, mf, out);
    if (sub == train) return cmd_train(common, data, mflags, epochs, threads, mf, out);
    if (sub == eval) {
      mflags.fold = eval_fold;
      return cmd_eval(common, data, mflags, rule, mf, out);
    }
    if (sub == trace) return cmd_trace(common, data, mflags, student, mf, out);
    if (sub == gradcheck) return cmd_gradcheck(common, gc, mf, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace grkt::cli
