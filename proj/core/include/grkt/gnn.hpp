#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grkt/autodiff.hpp"
#include "grkt/graph.hpp"
#include "grkt/params.hpp"

namespace grkt {

enum class GnnKind : std::uint8_t { kRetrieval, kGain, kLoss, kProgress, kLearn, kForget };
inline constexpr std::array<GnnKind, 6> kGnnKinds = {GnnKind::kRetrieval, GnnKind::kGain,  GnnKind::kLoss,
                                                     GnnKind::kProgress,  GnnKind::kLearn, GnnKind::kForget};
std::string_view gnn_name(GnnKind k);

enum class OutputActivation : std::uint8_t { kNone, kRelu, kNegRelu, kSoftplus };

struct GnnSpec {
  GnnKind kind = GnnKind::kGain;
  std::vector<std::size_t> dims;  // d_0 .. d_L
  bool feed_forward = true;
  bool question_scores = true;
  bool nonneg_weights = false;
  OutputActivation output = OutputActivation::kNone;

  std::size_t layers() const { return dims.size() - 1; }
  static GnnSpec make(GnnKind kind, const HyperParams& hp);
};

/// Store names: "gnn.<kind>.<layer>.<P|S|R>.<W|O>". For nonneg specs W holds raw values.
std::string gnn_param_name(GnnKind kind, std::size_t layer, Relation r, char which);

/// Registers W (and O when feed_forward) for every layer and relation.
void add_gnn_parameters(ParameterStore& store, const GnnSpec& spec, std::mt19937_64& rng);

/// CSR form of the three graphs, one adjacency per relation.
struct GraphAdjacency {
  std::array<ad::Adjacency, 3> rel;
  std::size_t num_nodes = 0;

  static GraphAdjacency from(const KcRelationGraphs& g);
  const ad::Adjacency& operator[](Relation r) const { return rel[index_of(r)]; }
};

/// Store indices of one GNN's weights.
struct GnnIndex {
  std::vector<std::array<std::size_t, 3>> w;
  std::vector<std::array<std::size_t, 3>> o;

  static GnnIndex lookup(const ParameterStore& store, const GnnSpec& spec);
};

/// One GNN's weights bound to a tape (W already constrained for nonneg specs).
struct GnnWeights {
  std::vector<std::array<ad::Var, 3>> w;
  std::vector<std::array<ad::Var, 3>> o;

  static GnnWeights bind(ParamBinder& binder, const GnnSpec& spec, const GnnIndex& idx);
};

/// Edge correlation scores for one pass, one E x 1 column per relation
/// (invalid for relations without edges).
struct CorrelationCache {
  std::array<ad::Var, 3> beta;
};

/// Per-layer message passing over P, S and R with mean aggregation of
/// beta * (x W) (times alpha_j when `alpha` is given), optional ReLU + O
/// feed-forward, branch sum, residual when widths match, and the spec's
/// output activation.
ad::Var gnn_forward(const GnnSpec& spec, ad::Var input, const GraphAdjacency& graphs,
                    const CorrelationCache& corr, const GnnWeights& weights, ad::Var alpha = {});

/// sigma(k_ci W_cor k_cj) on the stored parameters.
double edge_correlation(const ParameterStore& store, KcId ci, KcId cj, Relation r);
/// sigma(e_q W_req k_c) on the stored parameters.
double question_kc_score(const ParameterStore& store, QuestionId q, KcId c);

/// KCs reachable from `seeds` within `hops` steps over the union of P, S and R.
std::set<KcId> hop_support(const KcRelationGraphs& g, std::span<const KcId> seeds, std::size_t hops);

}  // namespace grkt
