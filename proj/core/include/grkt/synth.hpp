#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "grkt/data.hpp"
#include "grkt/graph.hpp"

namespace grkt {

/// Transparent student simulator with planted KC relations. It is not GRKT:
/// mastery is one scalar per KC, updated by practice, transfer along planted
/// edges and exponential decay between responses.
struct SynthConfig {
  std::size_t num_kcs = 50;
  std::size_t num_questions = 200;
  std::size_t num_students = 100;
  std::size_t min_length = 60;
  std::size_t max_length = 140;
  double multi_kc_probability = 0.2;

  /// Each KC after the first few gets this many planted prerequisites among
  /// the KCs shortly before it in the curriculum order.
  std::size_t prerequisites_per_kc = 1;
  std::size_t prerequisite_window = 4;
  /// KCs are grouped into clusters of this size; all pairs inside a cluster are similar.
  std::size_t cluster_size = 3;

  double ability_sd = 0.5;
  double cluster_sd = 4.0;
  double kc_sd = 1.0;
  double difficulty_sd = 1.0;
  double initial_offset = 0.0;
  double learn_increment = 0.5;
  double incorrect_factor = 0.5;
  double transfer = 0.5;
  /// Effective mastery of a KC is capped at its prerequisites' effective mastery + margin.
  double prerequisite_margin = 3.0;
  double decay_per_day = 0.1;
  double mean_gap_seconds = 3600.0;
  double long_gap_probability = 0.1;
  double mean_long_gap_seconds = 3.0 * 86400.0;
  double guess = 0.1;
  double slip = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthTruth {
  struct Step {
    std::vector<double> mastery;  // every KC before the response, dataset KC ids
    double p_correct = 0.0;
  };
  /// Indexed like the dataset's sequences (one per student, before splitting).
  std::vector<std::vector<Step>> steps;
};

struct SynthResult {
  Dataset dataset;           // ingested, not yet split
  KcRelationGraphs planted;  // over the dataset's KC ids
  SynthTruth truth;
  std::string csv;
};

SynthResult generate(const SynthConfig& cfg);

/// Sidecar with the config, planted edges (KC names) and per-response true mastery of the examined KCs.
void write_truth_json(std::ostream& out, const SynthConfig& cfg, const SynthResult& r);

struct RecoveryReport {
  std::size_t planted_prerequisite = 0, mined_prerequisite = 0, matched_prerequisite = 0;
  std::size_t planted_similar = 0, mined_similar = 0, matched_similar = 0;
  /// 1.0 by convention when the denominator set is empty.
  double prerequisite_precision = 1.0, prerequisite_recall = 1.0;
  double similar_precision = 1.0, similar_recall = 1.0;
};

RecoveryReport planted_graph_recovery_check(const Dataset& ds, const KcRelationGraphs& planted,
                                            const GraphBuildConfig& cfg);
RecoveryReport compare_graphs(const KcRelationGraphs& mined, const KcRelationGraphs& planted);

}  // namespace grkt
