#include "grkt/gnn.hpp"

#include <cmath>

#include "grkt/errors.hpp"

namespace grkt {

std::string_view gnn_name(GnnKind k) {
  switch (k) {
    case GnnKind::kRetrieval: return "rtv";
    case GnnKind::kGain: return "gain";
    case GnnKind::kLoss: return "loss";
    case GnnKind::kProgress: return "prg";
    case GnnKind::kLearn: return "lrn";
    case GnnKind::kForget: return "fgt";
  }
  return "?";
}

GnnSpec GnnSpec::make(GnnKind kind, const HyperParams& hp) {
  GnnSpec s;
  s.kind = kind;
  const std::size_t L = hp.layers, dk = hp.memory_dim;
  s.dims.assign(L + 1, dk);
  switch (kind) {
    case GnnKind::kRetrieval:
      s.feed_forward = false;
      s.nonneg_weights = true;
      break;
    case GnnKind::kGain:
    case GnnKind::kProgress:
      s.output = OutputActivation::kRelu;
      break;
    case GnnKind::kLoss:
      s.output = OutputActivation::kNegRelu;
      break;
    case GnnKind::kLearn:
    case GnnKind::kForget:
      s.dims[0] = hp.embed_dim;
      s.question_scores = false;
      s.output = OutputActivation::kSoftplus;
      break;
  }
  return s;
}

std::string gnn_param_name(GnnKind kind, std::size_t layer, Relation r, char which) {
  std::string s = "gnn.";
  s += gnn_name(kind);
  s += '.';
  s += std::to_string(layer);
  s += '.';
  s += relation_name(r);
  s += '.';
  s += which;
  return s;
}

namespace {

Matrix uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (auto& v : m.data) v = dist(rng);
  return m;
}

}  // namespace

void add_gnn_parameters(ParameterStore& store, const GnnSpec& spec, std::mt19937_64& rng) {
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t din = spec.dims[l], dout = spec.dims[l + 1];
    for (auto r : kRelations) {
      if (spec.feed_forward) {
        store.add(gnn_param_name(spec.kind, l, r, 'W'), uniform(din, din, rng));
        store.add(gnn_param_name(spec.kind, l, r, 'O'), uniform(din, dout, rng));
      } else if (spec.nonneg_weights) {
        store.add(gnn_param_name(spec.kind, l, r, 'W'), Matrix(din, dout));
      } else {
        store.add(gnn_param_name(spec.kind, l, r, 'W'), uniform(din, dout, rng));
      }
    }
  }
}

GraphAdjacency GraphAdjacency::from(const KcRelationGraphs& g) {
  GraphAdjacency a;
  a.num_nodes = g.num_kcs();
  for (auto r : kRelations) {
    auto& adj = a.rel[index_of(r)];
    adj.offsets.assign(1, 0);
    for (KcId c = 0; c < g.num_kcs(); ++c) {
      auto nb = g.neighbors(r, c);
      adj.neighbors.insert(adj.neighbors.end(), nb.begin(), nb.end());
      adj.offsets.push_back(static_cast<std::uint32_t>(adj.neighbors.size()));
    }
  }
  return a;
}

GnnIndex GnnIndex::lookup(const ParameterStore& store, const GnnSpec& spec) {
  GnnIndex idx;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    std::array<std::size_t, 3> w{}, o{};
    for (auto r : kRelations) {
      w[index_of(r)] = store.index(gnn_param_name(spec.kind, l, r, 'W'));
      if (spec.feed_forward) o[index_of(r)] = store.index(gnn_param_name(spec.kind, l, r, 'O'));
    }
    idx.w.push_back(w);
    if (spec.feed_forward) idx.o.push_back(o);
  }
  return idx;
}

GnnWeights GnnWeights::bind(ParamBinder& binder, const GnnSpec& spec, const GnnIndex& idx) {
  GnnWeights out;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    std::array<ad::Var, 3> w;
    for (std::size_t g = 0; g < 3; ++g) {
      w[g] = binder(idx.w[l][g]);
      if (spec.nonneg_weights) w[g] = ad::softmax_columns(w[g]);
    }
    out.w.push_back(w);
    if (spec.feed_forward) {
      std::array<ad::Var, 3> o;
      for (std::size_t g = 0; g < 3; ++g) o[g] = binder(idx.o[l][g]);
      out.o.push_back(o);
    }
  }
  return out;
}

ad::Var gnn_forward(const GnnSpec& spec, ad::Var input, const GraphAdjacency& graphs, const CorrelationCache& corr,
                    const GnnWeights& weights, ad::Var alpha) {
  if (input.cols() != spec.dims.front()) throw Error("gnn_forward: input width does not match the spec");
  if (input.rows() != graphs.num_nodes) throw Error("gnn_forward: one input row per KC required");
  if (spec.question_scores != alpha.valid()) throw Error("gnn_forward: question scores required iff the spec uses them");
  auto& tape = *input.tape();
  ad::Var x = input;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t din = spec.dims[l], dout = spec.dims[l + 1];
    std::vector<ad::Var> terms;
    for (std::size_t g = 0; g < 3; ++g) {
      const auto& adj = graphs.rel[g];
      if (adj.num_edges() == 0) continue;
      auto y = ad::matmul(x, weights.w[l][g]);
      auto agg = ad::graph_aggregate(y, adj, corr.beta[g], alpha);
      terms.push_back(spec.feed_forward ? ad::matmul(ad::relu(agg), weights.o[l][g]) : agg);
    }
    if (din == dout) terms.push_back(x);
    x = terms.empty() ? tape.constant(Matrix(graphs.num_nodes, dout)) : ad::add_n(terms);
  }
  switch (spec.output) {
    case OutputActivation::kNone: return x;
    case OutputActivation::kRelu: return ad::relu(x);
    case OutputActivation::kNegRelu: return ad::neg(ad::relu(x));
    case OutputActivation::kSoftplus: return ad::softplus(x);
  }
  return x;
}

namespace {

double bilinear_sigmoid(std::span<const double> a, const Matrix& w, std::span<const double> b) {
  double u = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) u += a[i] * w(i, j) * b[j];
  return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

}  // namespace

double edge_correlation(const ParameterStore& store, KcId ci, KcId cj, Relation r) {
  const auto& K = store.value("kc_embedding");
  const auto& W = store.value(std::string("cor.") + std::string(relation_name(r)));
  return bilinear_sigmoid(K.row(ci), W, K.row(cj));
}

double question_kc_score(const ParameterStore& store, QuestionId q, KcId c) {
  const auto& E = store.value("question_embedding");
  const auto& K = store.value("kc_embedding");
  return bilinear_sigmoid(E.row(q), store.value("req"), K.row(c));
}

std::set<KcId> hop_support(const KcRelationGraphs& g, std::span<const KcId> seeds, std::size_t hops) {
  std::set<KcId> seen(seeds.begin(), seeds.end());
  std::vector<KcId> frontier(seen.begin(), seen.end());
  for (std::size_t h = 0; h < hops && !frontier.empty(); ++h) {
    std::vector<KcId> next;
    for (auto c : frontier)
      for (auto r : kRelations)
        for (auto d : g.neighbors(r, c))
          if (seen.insert(d).second) next.push_back(d);
    frontier = std::move(next);
  }
  return seen;
}

}  // namespace grkt
