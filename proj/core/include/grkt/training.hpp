#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grkt/data.hpp"
#include "grkt/graph.hpp"
#include "grkt/metrics.hpp"
#include "grkt/model.hpp"
#include "grkt/params.hpp"

namespace grkt {

struct Ablation {
  bool no_learn_forget = false;  // -LF
  bool no_similarity = false;    // -SIM
  bool no_prerequisite = false;  // -PRE (drops P and S)

  /// "GRKT", "-LF", "-SIM", "-PRE", "-SIM-PRE", "-LF-SIM", ...
  std::string name() const;
  friend bool operator==(const Ablation&, const Ablation&) = default;
};

KcRelationGraphs apply_ablation(const KcRelationGraphs& g, const Ablation& a);

struct TrainConfig {
  HyperParams hyper;
  std::size_t max_epochs = 100;
  Ablation ablation;
  bool graphs_from_full_dataset = false;
  std::size_t min_cooccurrence = 10;
  std::size_t seq_len = 100;
  std::size_t min_len = 10;
  std::size_t folds = 5;
  double val_frac = 0.1;
  std::size_t threads = 1;

  void validate() const;
};

/// Flat `key = value` text; '#' starts a comment. Unknown keys are rejected.
/// Keys: embed_dim memory_dim hidden_dim layers learning_rate l2 eta seed
/// batch_size patience max_epochs min_cooccurrence seq_len min_len folds
/// val_frac threads no_lf no_sim no_pre graphs_from_full_dataset.
TrainConfig parse_config(std::istream& in, TrainConfig base = {});
TrainConfig read_config(const std::filesystem::path& path, TrainConfig base = {});
void write_config(std::ostream& out, const TrainConfig& cfg);

/// Mean cross-entropy over unmasked steps with predictions clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels,
                std::span<const std::uint8_t> mask = {});

struct Evaluation {
  MetricReport metrics;
  double loss = 0.0;
};

/// Runs the model in evaluation mode over `sequences` of `ds` (all when empty)
/// and computes every metric.
Evaluation evaluate(const GrktModel& model, const Dataset& ds, std::span<const std::size_t> sequences,
                    ConsistencyRule rule = ConsistencyRule::kDecline);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_auc;
  double val_acc = 0.0;
};

struct TrainReport {
  std::size_t fold = 0;
  std::string variant;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_val_auc;
  std::optional<Evaluation> test;
  double seconds = 0.0;
  std::string stop_reason;
};

struct TrainResult {
  ParameterStore params;
  KcRelationGraphs graphs;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Graphs used for one fold: mined from the fold's training sequences (or the
/// whole dataset when configured), then reduced by the ablation flags.
KcRelationGraphs graphs_for_fold(const Dataset& ds, const FoldSplit& fold, const TrainConfig& cfg);

/// Adam + L2 over batches of whole sequences, validation AUC after every
/// epoch, early stopping on `patience`, and test metrics for the best epoch.
TrainResult train_fold(const Dataset& ds, const FoldSplit& fold, const TrainConfig& cfg, const KcRelationGraphs& graphs,
                       const EpochCallback& on_epoch = {});

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

struct CrossValidationReport {
  std::vector<TrainReport> folds;
  std::map<std::string, MetricSummary> summary;  // auc, acc, consistency, gaucm, repetition
};

/// Trains every fold in `fold_ids` (all folds when empty). Graphs come from
/// `graphs` when given, otherwise from graphs_for_fold.
CrossValidationReport cross_validate(const Dataset& ds, const TrainConfig& cfg,
                                     const std::optional<KcRelationGraphs>& graphs = std::nullopt,
                                     std::span<const std::size_t> fold_ids = {}, const EpochCallback& on_epoch = {});

/// Mean and sample standard deviation of each test metric over the folds.
CrossValidationReport summarize(std::vector<TrainReport> folds);

std::string to_json(const TrainConfig& cfg);
std::string to_json(const MetricReport& m);
std::string to_json(const TrainReport& r);
std::string to_json(const CrossValidationReport& r);

}  // namespace grkt
