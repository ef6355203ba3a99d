#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "grkt/errors.hpp"
#include "grkt/synth.hpp"
#include "grkt/training.hpp"
#include "properties.hpp"

namespace grkt {
namespace {

using Labels = std::vector<std::uint8_t>;

TEST(Loss, HalfEverywhereIsLnTwo) {
  std::vector<double> p(7, 0.5);
  EXPECT_NEAR(bce_loss(p, Labels{1, 0, 1, 1, 0, 0, 1}), std::log(2.0), 1e-15);
}

TEST(Loss, PerfectPredictionsHitTheClamp) {
  const double v = bce_loss(std::vector<double>{1.0, 0.0}, Labels{1, 0});
  EXPECT_NEAR(v, -std::log(1 - 1e-7), 1e-15);
  EXPECT_NEAR(v, 1.0e-7, 1e-9);
}

TEST(Loss, MaskedStepsAreIgnored) {
  std::vector<double> p{0.3, 0.8, 0.6};
  Labels y{1, 0, 1}, mask{1, 0, 1};
  const double base = bce_loss(p, y, mask);
  p[1] = 0.0001;
  y[1] = 1;
  EXPECT_EQ(bce_loss(p, y, mask), base);
  EXPECT_THROW(bce_loss(p, y, Labels{0, 0, 0}), Error);
  EXPECT_THROW(bce_loss(p, Labels{1}), Error);
}

TEST(Config, RoundTrip) {
  TrainConfig cfg;
  cfg.hyper.embed_dim = 12;
  cfg.hyper.learning_rate = 1.25e-3;
  cfg.hyper.l2 = 1e-6;
  cfg.hyper.seed = 99;
  cfg.max_epochs = 7;
  cfg.ablation.no_similarity = true;
  cfg.val_frac = 0.2;
  cfg.threads = 3;
  std::stringstream buf;
  write_config(buf, cfg);
  auto back = parse_config(buf);
  EXPECT_EQ(back.hyper, cfg.hyper);
  EXPECT_EQ(back.max_epochs, 7u);
  EXPECT_EQ(back.ablation, cfg.ablation);
  EXPECT_EQ(back.val_frac, 0.2);
  EXPECT_EQ(back.threads, 3u);
}

TEST(Config, CommentsOverridesAndRejections) {
  std::istringstream in("# comment\nlayers = 3   # trailing\n\nno_lf = true\n");
  TrainConfig base;
  base.max_epochs = 4;
  auto cfg = parse_config(in, base);
  EXPECT_EQ(cfg.hyper.layers, 3u);
  EXPECT_TRUE(cfg.ablation.no_learn_forget);
  EXPECT_EQ(cfg.max_epochs, 4u);
  std::istringstream unknown("layer = 3\n");
  EXPECT_THROW(parse_config(unknown), ParseError);
  std::istringstream bad("layers = three\n");
  EXPECT_THROW(parse_config(bad), ParseError);
  std::istringstream no_eq("layers 3\n");
  EXPECT_THROW(parse_config(no_eq), ParseError);
}

TEST(Config, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.max_epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.min_len = 200;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.hyper.layers = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Ablation, Names) {
  EXPECT_EQ(Ablation{}.name(), "GRKT");
  EXPECT_EQ((Ablation{.no_learn_forget = true}).name(), "-LF");
  EXPECT_EQ((Ablation{.no_similarity = true, .no_prerequisite = true}).name(), "-SIM-PRE");
  EXPECT_EQ((Ablation{.no_learn_forget = true, .no_similarity = true}).name(), "-LF-SIM");
  EXPECT_EQ((Ablation{.no_prerequisite = true}).name(), "-PRE");
}

TEST(Ablation, DroppingAllGraphsLeavesNoEdges) {
  std::mt19937_64 rng(1);
  auto g = testing::random_graphs(6, 0.5, rng);
  auto empty = apply_ablation(g, {.no_similarity = true, .no_prerequisite = true});
  for (auto r : kRelations) EXPECT_EQ(empty.num_edges(r), 0u);
  std::vector<KcId> seeds{2};
  EXPECT_EQ(hop_support(empty, seeds, 3), (std::set<KcId>{2}));
  EXPECT_EQ(apply_ablation(g, {.no_learn_forget = true}), g);
}

// Small learnable dataset shared by the training tests.
const Dataset& tiny() {
  static const Dataset ds = [] {
    SynthConfig sc;
    sc.num_kcs = 8;
    sc.num_questions = 24;
    sc.num_students = 60;
    sc.min_length = 20;
    sc.max_length = 30;
    sc.seed = 3;
    return preprocess(generate(sc).dataset, 100, 10);
  }();
  return ds;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.hyper = testing::small_hyper(1, 5);
  cfg.hyper.batch_size = 8;
  cfg.hyper.learning_rate = 1e-2;
  cfg.max_epochs = 6;
  cfg.min_cooccurrence = 3;
  return cfg;
}

TEST(Training, LossDecreasesOverFirstEpochs) {
  auto cfg = tiny_config();
  cfg.hyper.patience = 100;
  auto fold = make_folds(tiny(), 5, 0.1, 1)[0];
  auto res = train_fold(tiny(), fold, cfg, graphs_for_fold(tiny(), fold, cfg));
  ASSERT_EQ(res.report.epochs.size(), 6u);
  EXPECT_LT(res.report.epochs[5].train_loss, res.report.epochs[0].train_loss);
  EXPECT_EQ(res.report.stop_reason, "reached max_epochs");
  EXPECT_EQ(res.report.variant, "GRKT");
}

TEST(Training, BestCheckpointHasTheBestValidationAuc) {
  auto cfg = tiny_config();
  cfg.hyper.patience = 2;
  auto fold = make_folds(tiny(), 5, 0.1, 2)[1];
  auto graphs = graphs_for_fold(tiny(), fold, cfg);
  auto res = train_fold(tiny(), fold, cfg, graphs);
  double best = -1;
  for (const auto& e : res.report.epochs) best = std::max(best, e.val_auc.value_or(-1));
  ASSERT_TRUE(res.report.best_val_auc.has_value());
  EXPECT_EQ(*res.report.best_val_auc, best);
  EXPECT_EQ(res.report.epochs[res.report.best_epoch].val_auc, res.report.best_val_auc);
  GrktModel model(res.params, res.graphs);
  EXPECT_EQ(evaluate(model, tiny(), fold.validation).metrics.auc, res.report.best_val_auc);
  ASSERT_TRUE(res.report.test.has_value());
  EXPECT_EQ(res.report.test->metrics.consistency, 1.0);
}

TEST(Training, PatienceZeroStopsAtFirstNonImprovingEpoch) {
  auto cfg = tiny_config();
  cfg.hyper.patience = 0;
  cfg.max_epochs = 30;
  cfg.hyper.learning_rate = 5e-2;
  auto fold = make_folds(tiny(), 5, 0.1, 1)[0];
  auto res = train_fold(tiny(), fold, cfg, graphs_for_fold(tiny(), fold, cfg));
  const auto& ep = res.report.epochs;
  if (res.report.stop_reason == "reached max_epochs") GTEST_SKIP() << "validation AUC improved every epoch";
  ASSERT_GE(ep.size(), 2u);
  EXPECT_EQ(res.report.best_epoch, ep.size() - 2);
  for (std::size_t i = 1; i + 1 < ep.size(); ++i) EXPECT_GT(*ep[i].val_auc, *ep[i - 1].val_auc);
  EXPECT_LE(*ep.back().val_auc, *ep[ep.size() - 2].val_auc);
}

TEST(Training, DeterministicAcrossRunsAndThreads) {
  auto cfg = tiny_config();
  cfg.max_epochs = 2;
  auto fold = make_folds(tiny(), 5, 0.1, 1)[2];
  auto graphs = graphs_for_fold(tiny(), fold, cfg);
  auto a = train_fold(tiny(), fold, cfg, graphs);
  auto b = train_fold(tiny(), fold, cfg, graphs);
  cfg.threads = 3;
  auto c = train_fold(tiny(), fold, cfg, graphs);
  EXPECT_TRUE(a.params.same_values(b.params));
  EXPECT_TRUE(a.params.same_values(c.params));
  EXPECT_EQ(a.report.test->metrics.auc, c.report.test->metrics.auc);
}

TEST(Training, CheckpointRoundTripPreservesEvaluation) {
  auto cfg = tiny_config();
  cfg.max_epochs = 1;
  auto fold = make_folds(tiny(), 5, 0.1, 1)[0];
  auto res = train_fold(tiny(), fold, cfg, graphs_for_fold(tiny(), fold, cfg));
  std::stringstream buf;
  write_checkpoint(buf, res.params);
  auto back = read_checkpoint(buf);
  EXPECT_TRUE(back.same_values(res.params));
  auto e1 = evaluate(GrktModel(res.params, res.graphs), tiny(), fold.test);
  auto e2 = evaluate(GrktModel(back, res.graphs), tiny(), fold.test);
  EXPECT_EQ(e1.metrics.auc, e2.metrics.auc);
  EXPECT_EQ(e1.loss, e2.loss);
}

TEST(Training, FoldGraphsComeFromTrainingSequencesOnly) {
  auto cfg = tiny_config();
  auto fold = make_folds(tiny(), 5, 0.1, 1)[0];
  GraphBuildConfig g{.eta = cfg.hyper.eta, .min_cooccurrence = cfg.min_cooccurrence};
  EXPECT_EQ(graphs_for_fold(tiny(), fold, cfg), build_graphs(tiny().subset(fold.train), g));
  cfg.graphs_from_full_dataset = true;
  EXPECT_EQ(graphs_for_fold(tiny(), fold, cfg), build_graphs(tiny(), g));
  cfg.graphs_from_full_dataset = false;
  cfg.ablation.no_similarity = true;
  EXPECT_EQ(graphs_for_fold(tiny(), fold, cfg).num_edges(Relation::kSimilar), 0u);
}

TEST(Evaluate, MetricsMatchDirectComputation) {
  std::mt19937_64 rng(4);
  auto inst = testing::random_instance(rng, 6, 1, 0.4, 5, 12, 0.5);
  GrktModel model(inst.store, inst.graphs);
  auto ev = evaluate(model, inst.data, {});
  std::vector<double> p;
  Labels y;
  for (const auto& s : inst.data.sequences) {
    auto res = forward_sequence(model, s);
    for (std::size_t t = 0; t < res.steps.size(); ++t) {
      p.push_back(res.steps[t].prediction);
      y.push_back(s.responses[t].correct);
    }
  }
  EXPECT_EQ(ev.metrics.responses, p.size());
  EXPECT_NEAR(*ev.metrics.auc, testing::brute_auc(p, y), 1e-12);
  EXPECT_EQ(ev.metrics.acc, testing::brute_accuracy(p, y));
  EXPECT_NEAR(ev.loss, bce_loss(p, y), 1e-12);
  EXPECT_EQ(ev.metrics.consistency, 1.0);
}

TrainReport report_with(double auc, double acc) {
  TrainReport r;
  Evaluation e;
  e.metrics.auc = auc;
  e.metrics.acc = acc;
  e.metrics.gaucm = auc - 0.1;
  e.metrics.repetition = 0.8;
  r.test = e;
  return r;
}

TEST(CrossValidation, SummaryMeanAndSampleStd) {
  auto cv = summarize({report_with(0.7, 0.6), report_with(0.8, 0.7), report_with(0.9, 0.8), TrainReport{}});
  EXPECT_EQ(cv.folds.size(), 4u);
  EXPECT_EQ(cv.summary.at("auc").count, 3u);
  EXPECT_NEAR(cv.summary.at("auc").mean, 0.8, 1e-15);
  EXPECT_NEAR(cv.summary.at("auc").std, 0.1, 1e-15);
  EXPECT_NEAR(cv.summary.at("acc").mean, 0.7, 1e-15);
  EXPECT_NEAR(cv.summary.at("repetition").std, 0.0, 1e-15);
  EXPECT_EQ(cv.summary.at("consistency").mean, 1.0);
}

TEST(CrossValidation, TwoFoldsOnTinyData) {
  auto cfg = tiny_config();
  cfg.folds = 2;
  cfg.max_epochs = 1;
  auto a = cross_validate(tiny(), cfg);
  ASSERT_EQ(a.folds.size(), 2u);
  EXPECT_EQ(a.summary.at("auc").count, 2u);
  EXPECT_NEAR(a.summary.at("auc").mean, (*a.folds[0].test->metrics.auc + *a.folds[1].test->metrics.auc) / 2, 1e-15);
  auto b = cross_validate(tiny(), cfg);
  EXPECT_EQ(a.summary.at("auc").mean, b.summary.at("auc").mean);
  std::vector<std::size_t> only{1};
  auto c = cross_validate(tiny(), cfg, std::nullopt, only);
  ASSERT_EQ(c.folds.size(), 1u);
  EXPECT_EQ(c.folds[0].fold, 1u);
  std::vector<std::size_t> bad{5};
  EXPECT_THROW(cross_validate(tiny(), cfg, std::nullopt, bad), ConfigError);
}

TEST(Reports, JsonIsWellFormed) {
  auto cv = summarize({report_with(0.7, 0.6), report_with(0.8, 0.7)});
  auto j = nlohmann::json::parse(to_json(cv));
  EXPECT_TRUE(j.contains("summary"));
  EXPECT_NEAR(j["summary"]["auc"]["mean"].get<double>(), 0.75, 1e-15);
  auto c = nlohmann::json::parse(to_json(tiny_config()));
  EXPECT_EQ(c["max_epochs"].get<int>(), 6);
}

}  // namespace
}  // namespace grkt
