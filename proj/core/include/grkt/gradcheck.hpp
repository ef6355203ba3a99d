#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "grkt/data.hpp"
#include "grkt/graph.hpp"
#include "grkt/model.hpp"
#include "grkt/params.hpp"

namespace grkt {

struct GradCheckOptions {
  std::size_t samples = 256;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-5;
  std::uint64_t seed = 0;
};

struct GradCheckGroup {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates where a discrete decision flips inside [-h, h]
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Objective and its gradient for a store; `signature` captures discrete choices.
struct Objective {
  std::function<double(std::vector<char>* signature)> value;
  std::function<Gradients()> gradient;
};

/// Central differences on `samples` coordinates drawn uniformly from every
/// array of `store`. Coordinates whose signature differs at +h and -h are skipped.
GradCheckReport grad_check(ParameterStore& store, const Objective& f, const GradCheckOptions& opt);

/// Summed training-mode loss of `sequences` under `model` (which views `store`).
Objective sequence_objective(const GrktModel& model, const std::vector<ResponseSequence>& sequences);

struct DeskGradCheckConfig {
  HyperParams hyper;
  std::size_t num_kcs = 6;
  std::size_t num_questions = 8;
  std::size_t num_sequences = 2;
  std::size_t seq_len = 5;
  double edge_probability = 0.4;
  GradCheckOptions check;

  DeskGradCheckConfig();
};

/// Random graphs, data and parameters of the desk size, then grad_check.
GradCheckReport desk_grad_check(const DeskGradCheckConfig& cfg);

}  // namespace grkt
