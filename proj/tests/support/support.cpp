#include "support.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "grkt/model.hpp"

namespace grkt::testing {

Mat to_mat(const Matrix& m) {
  Mat out(m.rows, std::vector<double>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out[r][c] = m(r, c);
  return out;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (auto& v : m.data) v = u(rng);
  return m;
}

KcRelationGraphs random_graphs(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<ScoredEdge> pre, sim;
  for (KcId i = 0; i < n; ++i)
    for (KcId j = 0; j < n; ++j) {
      if (i == j) continue;
      if (coin(rng)) pre.push_back({i, j, 1.0});
      if (i < j && coin(rng)) sim.push_back({i, j, 1.0});
    }
  return KcRelationGraphs::from_edges(n, std::move(pre), std::move(sim));
}

Dataset random_dataset(std::size_t nq, std::size_t nc, std::size_t num_sequences, std::size_t length,
                       std::mt19937_64& rng, std::size_t max_kcs, std::int64_t max_gap) {
  Dataset ds;
  for (std::size_t c = 0; c < nc; ++c) ds.kcs.intern("k" + std::to_string(c));
  std::uniform_int_distribution<std::size_t> kc_count(1, std::max<std::size_t>(1, std::min(max_kcs, nc)));
  std::uniform_int_distribution<KcId> any_kc(0, static_cast<KcId>(nc - 1));
  for (std::size_t q = 0; q < nq; ++q) {
    ds.questions.intern("q" + std::to_string(q));
    std::set<KcId> kcs;
    const std::size_t k = kc_count(rng);
    while (kcs.size() < k) kcs.insert(any_kc(rng));
    ds.question_kcs.emplace_back(kcs.begin(), kcs.end());
  }
  std::uniform_int_distribution<QuestionId> any_q(0, static_cast<QuestionId>(nq - 1));
  std::uniform_int_distribution<std::int64_t> gap(0, max_gap);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t s = 0; s < num_sequences; ++s) {
    ResponseSequence seq;
    seq.student = ds.students.intern("s" + std::to_string(s));
    std::int64_t ts = 1'000'000;
    for (std::size_t t = 0; t < length; ++t) {
      Response r;
      r.question = any_q(rng);
      r.kcs = ds.question_kcs[r.question];
      r.correct = coin(rng) ? 1 : 0;
      r.timestamp = ts;
      ts += gap(rng);
      seq.responses.push_back(r);
    }
    seq.valid_len = length;
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

ParameterStore random_store(std::size_t nq, std::size_t nc, const HyperParams& hp, std::mt19937_64& rng, double sd) {
  auto s = init_parameters(nq, nc, hp);
  std::normal_distribution<double> noise(0.0, sd);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (auto& v : s[i].value.data) v += noise(rng);
  return s;
}

HyperParams small_hyper(std::size_t layers, std::uint64_t seed) {
  HyperParams hp;
  hp.embed_dim = 4;
  hp.memory_dim = 3;
  hp.hidden_dim = 5;
  hp.layers = layers;
  hp.seed = seed;
  return hp;
}

// --- reference recurrence --------------------------------------------------

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double relu(double x) { return x > 0 ? x : 0.0; }

Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

Mat mul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), k = b.size();
  Mat out = zeros(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < m; ++j) out[i][j] += a[i][p] * b[p][j];
  return out;
}

double bilinear(const std::vector<double>& x, const Mat& w, const std::vector<double>& y) {
  double u = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) u += x[i] * w[i][j] * y[j];
  return u;
}

std::vector<double> mlp(const ParameterStore& s, const std::string& name, const std::vector<double>& x) {
  auto W1 = to_mat(s.value("mlp." + name + ".W1"));
  auto b1 = s.value("mlp." + name + ".b1").data;
  auto W2 = to_mat(s.value("mlp." + name + ".W2"));
  auto b2 = s.value("mlp." + name + ".b2").data;
  std::vector<double> h(b1.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    double v = b1[j];
    for (std::size_t i = 0; i < x.size(); ++i) v += x[i] * W1[i][j];
    h[j] = relu(v);
  }
  std::vector<double> o(b2.size());
  for (std::size_t j = 0; j < o.size(); ++j) {
    double v = b2[j];
    for (std::size_t i = 0; i < h.size(); ++i) v += h[i] * W2[i][j];
    o[j] = v;
  }
  return o;
}

Mat column_softmax(const Mat& a) {
  Mat out = a;
  for (std::size_t c = 0; c < (a.empty() ? 0 : a[0].size()); ++c) {
    double z = 0;
    for (std::size_t r = 0; r < a.size(); ++r) z += std::exp(a[r][c]);
    for (std::size_t r = 0; r < a.size(); ++r) out[r][c] = std::exp(a[r][c]) / z;
  }
  return out;
}

std::vector<double> concat(std::initializer_list<std::vector<double>> parts) {
  std::vector<double> v;
  for (const auto& p : parts) v.insert(v.end(), p.begin(), p.end());
  return v;
}

enum class Out { kNone, kRelu, kNegRelu, kSoftplus };

struct Net {
  std::string name;
  bool feed_forward;
  bool nonneg;
  Out out;
};

const std::array<const char*, 3> kRel = {"P", "S", "R"};
constexpr std::array<Relation, 3> kRelEnum = {Relation::kPrerequisite, Relation::kSubsequent, Relation::kSimilar};

struct Reference {
  const ParameterStore& s;
  const KcRelationGraphs& g;
  std::size_t n, L;
  Mat K, Wreq;
  std::vector<double> w;
  std::array<std::map<std::pair<KcId, KcId>, double>, 3> beta;

  Reference(const ParameterStore& store, const KcRelationGraphs& graphs)
      : s(store), g(graphs), n(graphs.num_kcs()), L(store.hyper.layers) {
    auto Kall = to_mat(s.value("kc_embedding"));
    K.assign(Kall.begin(), Kall.begin() + static_cast<std::ptrdiff_t>(n));
    Wreq = to_mat(s.value("req"));
    const auto& raw = s.value("w_h_raw").data;
    double z = 0;
    for (double v : raw) z += std::exp(v);
    for (double v : raw) w.push_back(std::exp(v) / z);
    for (std::size_t r = 0; r < 3; ++r) {
      auto W = to_mat(s.value(std::string("cor.") + kRel[r]));
      for (KcId i = 0; i < n; ++i)
        for (auto j : g.neighbors(kRelEnum[r], i)) beta[r][{i, j}] = sig(bilinear(K[i], W, K[j]));
    }
  }

  std::vector<double> alpha(QuestionId q) const {
    auto e = to_mat(s.value("question_embedding"))[q];
    std::vector<double> a(n);
    for (std::size_t c = 0; c < n; ++c) a[c] = sig(bilinear(e, Wreq, K[c]));
    return a;
  }

  std::vector<double> e_bar(QuestionId q, const std::vector<KcId>& kcs) const {
    std::vector<double> kbar(K[0].size(), 0.0);
    for (auto c : kcs)
      for (std::size_t i = 0; i < kbar.size(); ++i) kbar[i] += K[c][i] / static_cast<double>(kcs.size());
    return concat({kbar, to_mat(s.value("question_embedding"))[q]});
  }

  Mat gnn(const Net& net, Mat x, const std::vector<double>* a) const {
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t din = x[0].size();
      std::optional<Mat> acc;
      auto accumulate = [&](const Mat& t) {
        if (!acc) acc = t;
        else
          for (std::size_t i = 0; i < t.size(); ++i)
            for (std::size_t j = 0; j < t[i].size(); ++j) (*acc)[i][j] += t[i][j];
      };
      for (std::size_t r = 0; r < 3; ++r) {
        if (beta[r].empty()) continue;
        const std::string base = "gnn." + net.name + "." + std::to_string(l) + "." + kRel[r] + ".";
        auto W = to_mat(s.value(base + "W"));
        if (net.nonneg) W = column_softmax(W);
        auto y = mul(x, W);
        Mat agg = zeros(n, y[0].size());
        for (KcId i = 0; i < n; ++i) {
          auto nb = g.neighbors(kRelEnum[r], i);
          for (auto j : nb) {
            const double coef = beta[r].at({i, j}) * (a ? (*a)[j] : 1.0) / static_cast<double>(nb.size());
            for (std::size_t k = 0; k < y[0].size(); ++k) agg[i][k] += coef * y[j][k];
          }
        }
        if (net.feed_forward) {
          for (auto& row : agg)
            for (auto& v : row) v = relu(v);
          agg = mul(agg, to_mat(s.value(base + "O")));
        }
        accumulate(agg);
      }
      const std::size_t dout = s.hyper.memory_dim;
      if (din == dout) accumulate(x);
      x = acc ? *acc : zeros(n, dout);
    }
    for (auto& row : x)
      for (auto& v : row) {
        switch (net.out) {
          case Out::kNone: break;
          case Out::kRelu: v = relu(v); break;
          case Out::kNegRelu: v = -relu(v); break;
          case Out::kSoftplus: v = std::log1p(std::exp(v)); break;
        }
      }
    return x;
  }

  std::vector<double> mastery(const Mat& H) const {
    std::vector<double> m(n, 0.0);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t k = 0; k < w.size(); ++k) m[c] += H[c][k] * w[k];
    return m;
  }
};

}  // namespace

std::vector<RefStep> reference_forward(const ParameterStore& store, const KcRelationGraphs& graphs,
                                       const ResponseSequence& seq, bool learn_forget, bool train_mode) {
  Reference ref(store, graphs);
  const std::size_t n = ref.n;
  const Net rtv{"rtv", false, true, Out::kNone}, gain{"gain", true, false, Out::kRelu},
      loss{"loss", true, false, Out::kNegRelu}, prg{"prg", true, false, Out::kRelu},
      lrn{"lrn", true, false, Out::kSoftplus}, fgt{"fgt", true, false, Out::kSoftplus};
  Mat H = to_mat(store.value("H0"));
  const Mat H0 = H;
  Mat gamma, theta;
  if (learn_forget) {
    gamma = ref.gnn(lrn, ref.K, nullptr);
    theta = ref.gnn(fgt, ref.K, nullptr);
  }
  std::vector<std::uint32_t> counts(n, 0);
  std::vector<RefStep> out;
  auto real = seq.real();
  for (std::size_t t = 0; t < real.size(); ++t) {
    const auto& r = real[t];
    RefStep st;
    st.pre = ref.mastery(H);
    const auto a = ref.alpha(r.question);
    const auto eb = ref.e_bar(r.question, r.kcs);

    // Stage I
    auto X = ref.gnn(rtv, H, &a);
    std::vector<double> hbar(H[0].size(), 0.0);
    for (auto c : r.kcs)
      for (std::size_t k = 0; k < hbar.size(); ++k) hbar[k] += X[c][k] / static_cast<double>(r.kcs.size());
    double m = 0;
    for (std::size_t k = 0; k < hbar.size(); ++k) m += hbar[k] * ref.w[k];
    const double d = mlp(store, "diff", eb)[0];
    st.aggregated = m;
    st.difficulty = d;
    st.prediction = sig(m - d);

    // Stage II
    Mat seed = zeros(n, H[0].size());
    for (auto c : r.kcs) seed[c] = mlp(store, r.correct ? "gain" : "loss", concat({H[c], eb}));
    auto delta = ref.gnn(r.correct ? gain : loss, seed, &a);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t k = 0; k < H[c].size(); ++k) H[c][k] += delta[c][k];
    st.post = ref.mastery(H);
    st.memory_post = H;

    // Stage III
    if (learn_forget && t + 1 < real.size()) {
      const auto& nx = real[t + 1];
      const auto a_next = ref.alpha(nx.question);
      const auto eb_next = ref.e_bar(nx.question, nx.kcs);
      std::set<KcId> cand(r.kcs.begin(), r.kcs.end());
      cand.insert(nx.kcs.begin(), nx.kcs.end());
      Mat pseed = zeros(n, H[0].size());
      bool any = false;
      for (auto c : cand) {
        auto z = concat({H[c], eb, eb_next});
        auto logits = mlp(store, "dcs", z);
        const double p1 = std::exp(logits[1]) / (std::exp(logits[0]) + std::exp(logits[1]));
        if (!(p1 > 1.0 - p1)) continue;
        any = true;
        auto p = mlp(store, "prg", z);
        if (train_mode)
          for (auto& v : p) v *= p1;
        pseed[c] = p;
      }
      Mat P = zeros(n, H[0].size());
      if (any) {
        std::vector<double> mixed(n);
        for (std::size_t c = 0; c < n; ++c) {
          const bool now = std::find(r.kcs.begin(), r.kcs.end(), c) != r.kcs.end();
          const bool next = std::find(nx.kcs.begin(), nx.kcs.end(), c) != nx.kcs.end();
          mixed[c] = now ? a[c] : next ? a_next[c] : 0.5 * (a[c] + a_next[c]);
        }
        P = ref.gnn(prg, pseed, &mixed);
      }
      const double minutes = std::min(std::max(static_cast<double>(nx.timestamp - r.timestamp), 0.0) / 60.0, 43200.0);
      for (std::size_t c = 0; c < n; ++c) {
        const bool learned = std::any_of(P[c].begin(), P[c].end(), [](double v) { return v != 0.0; });
        const double steps = static_cast<double>(counts[c] + 1) * minutes;
        for (std::size_t k = 0; k < H[c].size(); ++k) {
          if (learned) H[c][k] += P[c][k] * (1.0 - std::exp(-steps * gamma[c][k]));
          else H[c][k] -= (H[c][k] - H0[c][k]) * (1.0 - std::exp(-steps * theta[c][k]));
        }
        if (learned) ++counts[c];
      }
      st.after = ref.mastery(H);
      st.memory_after = H;
    }
    out.push_back(std::move(st));
  }
  return out;
}

// --- metric oracles --------------------------------------------------------

double brute_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!(y[i] == 1 && y[j] == 0)) continue;
      den += 1;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return num / den;
}

double brute_accuracy(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double hits = 0;
  for (std::size_t i = 0; i < s.size(); ++i) hits += ((s[i] >= 0.5 ? 1 : 0) == y[i]) ? 1 : 0;
  return hits / static_cast<double>(s.size());
}

double brute_consistency(const std::vector<BruteStep>& steps) {
  double num = 0, den = 0;
  for (const auto& st : steps) {
    bool drop = false;
    for (auto c : st.examined) drop = drop || st.post[c] < st.pre[c];
    if (!drop) continue;
    for (std::size_t c = 0; c < st.pre.size(); ++c) {
      den += 1;
      num += st.post[c] <= st.pre[c] ? 1 : 0;
    }
  }
  return den == 0 ? 1.0 : num / den;
}

std::optional<double> brute_gaucm(const std::vector<EvalRecord>& records) {
  std::map<QuestionId, std::vector<const EvalRecord*>> by_q;
  for (const auto& r : records) by_q[r.question].push_back(&r);
  double num = 0, den = 0;
  for (const auto& [q, rs] : by_q) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    bool pos = false, neg = false;
    for (auto* r : rs) {
      s.push_back(r->mastery);
      y.push_back(r->correct);
      (r->correct ? pos : neg) = true;
    }
    if (!(pos && neg)) continue;
    num += static_cast<double>(rs.size()) * brute_auc(s, y);
    den += static_cast<double>(rs.size());
  }
  if (den == 0) return std::nullopt;
  return num / den;
}

std::set<KcId> reach_within(const KcRelationGraphs& g, const std::vector<KcId>& seeds, std::size_t hops) {
  const std::size_t n = g.num_kcs();
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (KcId i = 0; i < n; ++i)
    for (std::size_t r = 0; r < 3; ++r)
      for (auto j : g.neighbors(kRelEnum[r], i)) adj[i][j] = 1;
  std::vector<char> cur(n, 0);
  for (auto c : seeds) cur[c] = 1;
  for (std::size_t h = 0; h < hops; ++h) {
    auto next = cur;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (cur[i] && adj[i][j]) next[j] = 1;
    cur = std::move(next);
  }
  std::set<KcId> out;
  for (KcId c = 0; c < n; ++c)
    if (cur[c]) out.insert(c);
  return out;
}

std::filesystem::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  std::random_device rd;
  auto p = std::filesystem::temp_directory_path() /
           ("grkt_test_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace grkt::testing
