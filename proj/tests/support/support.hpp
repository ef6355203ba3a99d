#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls the production kernels it is used to check.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "grkt/data.hpp"
#include "grkt/graph.hpp"
#include "grkt/metrics.hpp"
#include "grkt/params.hpp"

namespace grkt::testing {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Matrix& m);
Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);

/// Each ordered pair becomes a prerequisite edge with probability p, each
/// unordered pair a similarity edge with probability p.
KcRelationGraphs random_graphs(std::size_t num_kcs, double p, std::mt19937_64& rng);

/// Dataset built directly (no CSV): questions examine 1..max_kcs KCs,
/// timestamps increase by random gaps of up to `max_gap` seconds.
Dataset random_dataset(std::size_t num_questions, std::size_t num_kcs, std::size_t num_sequences, std::size_t length,
                       std::mt19937_64& rng, std::size_t max_kcs = 2, std::int64_t max_gap = 7200);

/// init_parameters plus N(0, sd) noise on every entry, so zero-initialized
/// arrays (biases, projection, retrieval weights) are exercised too.
ParameterStore random_store(std::size_t num_questions, std::size_t num_kcs, const HyperParams& hp,
                            std::mt19937_64& rng, double sd = 0.3);

HyperParams small_hyper(std::size_t layers = 1, std::uint64_t seed = 1);

// --- straight-line reference of the three-stage recurrence -----------------

struct RefStep {
  double prediction = 0.0;
  double aggregated = 0.0;
  double difficulty = 0.0;
  std::vector<double> pre, post, after;  // mastery of every KC
  Mat memory_post, memory_after;
};

/// Evaluates the full recurrence with plain loops over the parameter values.
std::vector<RefStep> reference_forward(const ParameterStore& store, const KcRelationGraphs& graphs,
                                       const ResponseSequence& seq, bool learn_forget = true, bool train_mode = false);

// --- brute-force metric oracles --------------------------------------------

double brute_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);
double brute_accuracy(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);
struct BruteStep {
  std::vector<KcId> examined;
  std::vector<double> pre, post;
};
double brute_consistency(const std::vector<BruteStep>& steps);
std::optional<double> brute_gaucm(const std::vector<EvalRecord>& records);

/// Reachability within `hops` steps over the union of P, S and R, computed by
/// boolean matrix powers.
std::set<KcId> reach_within(const KcRelationGraphs& g, const std::vector<KcId>& seeds, std::size_t hops);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

std::string read_file(const std::filesystem::path& p);

}  // namespace grkt::testing
