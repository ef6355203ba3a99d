#include "grkt/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include "grkt/errors.hpp"

namespace grkt {

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::kPrerequisite: return "P";
    case Relation::kSubsequent: return "S";
    case Relation::kSimilar: return "R";
  }
  return "?";
}

void GraphBuildConfig::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("graph threshold eta must lie in (0, 1)");
  if (min_cooccurrence < 1) throw ConfigError("min_cooccurrence must be at least 1");
}

KcRelationGraphs::KcRelationGraphs(std::size_t num_kcs) : num_kcs_(num_kcs) {
  for (auto& a : adj_) a.assign(num_kcs, {});
}

KcRelationGraphs KcRelationGraphs::from_edges(std::size_t num_kcs, std::vector<ScoredEdge> prerequisite,
                                              std::vector<ScoredEdge> similar) {
  KcRelationGraphs g(num_kcs);
  auto check = [&](const ScoredEdge& e) {
    if (e.src >= num_kcs || e.dst >= num_kcs) throw ConfigError("edge references KC outside [0, |C|)");
  };
  auto by_pair = [](const ScoredEdge& a, const ScoredEdge& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  };
  auto same_pair = [](const ScoredEdge& a, const ScoredEdge& b) { return a.src == b.src && a.dst == b.dst; };

  std::erase_if(prerequisite, [](const ScoredEdge& e) { return e.src == e.dst; });
  for (const auto& e : prerequisite) check(e);
  std::stable_sort(prerequisite.begin(), prerequisite.end(), by_pair);
  prerequisite.erase(std::unique(prerequisite.begin(), prerequisite.end(), same_pair), prerequisite.end());

  std::erase_if(similar, [](const ScoredEdge& e) { return e.src == e.dst; });
  for (auto& e : similar) {
    check(e);
    if (e.src > e.dst) std::swap(e.src, e.dst);
  }
  std::stable_sort(similar.begin(), similar.end(), by_pair);
  similar.erase(std::unique(similar.begin(), similar.end(), same_pair), similar.end());

  auto& P = g.adj_[index_of(Relation::kPrerequisite)];
  auto& S = g.adj_[index_of(Relation::kSubsequent)];
  auto& R = g.adj_[index_of(Relation::kSimilar)];
  for (const auto& e : prerequisite) {
    P[e.src].push_back(e.dst);
    S[e.dst].push_back(e.src);
  }
  for (const auto& e : similar) {
    R[e.src].push_back(e.dst);
    R[e.dst].push_back(e.src);
  }
  for (auto& a : g.adj_)
    for (auto& list : a) std::sort(list.begin(), list.end());
  g.prerequisite_ = std::move(prerequisite);
  g.similar_ = std::move(similar);
  return g;
}

std::size_t KcRelationGraphs::num_edges(Relation r) const {
  std::size_t n = 0;
  for (const auto& list : adj_[index_of(r)]) n += list.size();
  return n;
}

double KcRelationGraphs::sparsity(Relation r) const {
  if (num_kcs_ < 2) return 0.0;
  return static_cast<double>(num_edges(r)) / static_cast<double>(num_kcs_ * (num_kcs_ - 1));
}

bool KcRelationGraphs::has_edge(Relation r, KcId src, KcId dst) const {
  auto n = neighbors(r, src);
  return std::binary_search(n.begin(), n.end(), dst);
}

KcRelationGraphs KcRelationGraphs::without_prerequisite() const {
  auto g = from_edges(num_kcs_, {}, similar_);
  g.eta = eta;
  g.min_cooccurrence = min_cooccurrence;
  return g;
}

KcRelationGraphs KcRelationGraphs::without_similarity() const {
  auto g = from_edges(num_kcs_, prerequisite_, {});
  g.eta = eta;
  g.min_cooccurrence = min_cooccurrence;
  return g;
}

PairStatistics::PairStatistics(const Dataset& logs) : n_(logs.num_kcs()) {
  const auto cells = n_ * n_;
  total_.assign(cells, 0);
  concordant_.assign(cells, 0);
  c10_.assign(cells, 0);
  c01_.assign(cells, 0);

  // Pool every student's sequences in dataset order (chronological after ingestion).
  std::vector<std::vector<const Response*>> history(logs.num_students());
  for (const auto& seq : logs.sequences)
    for (const auto& r : seq.real()) history.at(seq.student).push_back(&r);

  std::vector<std::uint64_t> n1(n_), n0(n_), seen1(n_), seen0(n_);
  std::vector<KcId> touched;
  std::vector<char> is_touched(n_, 0);
  std::map<std::pair<KcId, KcId>, std::uint64_t> same_response;

  for (const auto& responses : history) {
    if (responses.empty()) continue;
    touched.clear();
    same_response.clear();
    for (const auto* r : responses) {
      for (auto c : r->kcs) {
        if (c >= n_) continue;
        if (!is_touched[c]) {
          is_touched[c] = 1;
          touched.push_back(c);
        }
        (r->correct ? n1[c] : n0[c])++;
      }
      for (auto a : r->kcs)
        for (auto b : r->kcs)
          if (a != b && a < n_ && b < n_) ++same_response[{a, b}];
    }
    std::sort(touched.begin(), touched.end());

    // Both temporal orders, distinct responses only.
    for (auto ci : touched)
      for (auto cj : touched) {
        if (ci == cj) continue;
        std::uint64_t both = 0;
        if (auto it = same_response.find({ci, cj}); it != same_response.end()) both = it->second;
        auto na = n1[ci] + n0[ci], nb = n1[cj] + n0[cj];
        total_[ci * n_ + cj] += na * nb - both;
        concordant_[ci * n_ + cj] += n1[ci] * n1[cj] + n0[ci] * n0[cj] - both;
      }

    // Temporal order t < t': earlier responses accumulate into seen*.
    for (const auto* r : responses) {
      for (auto cj : r->kcs) {
        if (cj >= n_) continue;
        for (auto ci : touched) {
          if (ci == cj) continue;
          if (r->correct == 0) c10_[ci * n_ + cj] += seen1[ci];
          else c01_[ci * n_ + cj] += seen0[ci];
        }
      }
      for (auto c : r->kcs)
        if (c < n_) (r->correct ? seen1[c] : seen0[c])++;
    }

    for (auto c : touched) {
      n1[c] = n0[c] = seen1[c] = seen0[c] = 0;
      is_touched[c] = 0;
    }
  }
}

std::optional<double> PairStatistics::similarity(KcId ci, KcId cj, std::size_t min_cooccurrence) const {
  if (ci == cj || ci >= n_ || cj >= n_) return std::nullopt;
  auto den = cooccurrence(ci, cj);
  if (den == 0 || den < min_cooccurrence) return std::nullopt;
  return static_cast<double>(concordant(ci, cj)) / static_cast<double>(den);
}

std::optional<double> PairStatistics::prerequisite(KcId ci, KcId cj, std::size_t min_cooccurrence) const {
  if (ci == cj || ci >= n_ || cj >= n_) return std::nullopt;
  auto num = correct_then_incorrect(ci, cj);
  auto den = num + incorrect_then_correct(ci, cj);
  if (den == 0 || den < min_cooccurrence) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> similarity_score(const Dataset& logs, KcId ci, KcId cj, std::size_t min_cooccurrence) {
  return PairStatistics(logs).similarity(ci, cj, min_cooccurrence);
}

std::optional<double> prerequisite_score(const Dataset& logs, KcId ci, KcId cj, std::size_t min_cooccurrence) {
  return PairStatistics(logs).prerequisite(ci, cj, min_cooccurrence);
}

KcRelationGraphs build_graphs(const PairStatistics& stats, const GraphBuildConfig& cfg) {
  cfg.validate();
  const auto n = stats.num_kcs();
  std::vector<ScoredEdge> pre, sim;
  for (KcId i = 0; i < n; ++i)
    for (KcId j = 0; j < n; ++j) {
      if (i == j) continue;
      auto forward = stats.prerequisite(i, j, cfg.min_cooccurrence);
      if (forward && *forward >= cfg.eta) {
        // Keep only the stronger direction of a mutual pair; ties keep both.
        auto backward = stats.prerequisite(j, i, cfg.min_cooccurrence);
        if (!(backward && *backward >= cfg.eta && *backward > *forward)) pre.push_back({i, j, *forward});
      }
      if (i < j) {
        auto a = stats.similarity(i, j, cfg.min_cooccurrence);
        auto b = stats.similarity(j, i, cfg.min_cooccurrence);
        std::optional<double> s;
        if (a && b) s = std::max(*a, *b);
        else if (a) s = a;
        else s = b;
        if (s && *s >= cfg.eta) sim.push_back({i, j, *s});
      }
    }
  auto g = KcRelationGraphs::from_edges(n, std::move(pre), std::move(sim));
  g.eta = cfg.eta;
  g.min_cooccurrence = cfg.min_cooccurrence;
  return g;
}

KcRelationGraphs build_graphs(const Dataset& logs, const GraphBuildConfig& cfg) {
  cfg.validate();
  return build_graphs(PairStatistics(logs), cfg);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',' || ch == '\t') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    auto b = f.find_first_not_of(' ');
    auto e = f.find_last_not_of(' ');
    f = b == std::string::npos ? "" : f.substr(b, e - b + 1);
  }
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

KcRelationGraphs load_labeled_graphs(std::istream& in, const IdMap& kcs, double min_confidence) {
  // kind -> (src, dst) -> (sum, count)
  std::map<std::pair<KcId, KcId>, std::pair<double, std::size_t>> pre, sim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_fields(line);
    if (f.size() != 4) throw ParseError("labeled relation row needs 4 columns", line_no);
    auto conf = to_double(f[3]);
    if (!conf) {
      if (line_no == 1) continue;  // header
      throw ParseError("invalid confidence '" + f[3] + "'", line_no);
    }
    std::string kind = f[2];
    std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return std::tolower(c); });
    bool is_pre = kind == "prerequisite" || kind == "p";
    bool is_sub = kind == "subsequent" || kind == "s";
    bool is_sim = kind == "similar" || kind == "similarity" || kind == "r";
    if (!is_pre && !is_sub && !is_sim) throw ParseError("unknown relation kind '" + f[2] + "'", line_no);
    auto a = kcs.find(f[0]);
    auto b = kcs.find(f[1]);
    if (!a || !b || *a == *b) continue;
    std::pair<KcId, KcId> key{*a, *b};
    if (is_sub) key = {*b, *a};
    if (is_sim && key.first > key.second) std::swap(key.first, key.second);
    auto& cell = (is_sim ? sim : pre)[key];
    cell.first += *conf;
    cell.second += 1;
  }
  std::vector<ScoredEdge> pe, se;
  for (const auto& [k, v] : pre) {
    double mean = v.first / static_cast<double>(v.second);
    if (mean > min_confidence) pe.push_back({k.first, k.second, mean});
  }
  for (const auto& [k, v] : sim) {
    double mean = v.first / static_cast<double>(v.second);
    if (mean > min_confidence) se.push_back({k.first, k.second, mean});
  }
  return KcRelationGraphs::from_edges(kcs.size(), std::move(pe), std::move(se));
}

KcRelationGraphs load_labeled_graphs(const std::filesystem::path& path, const IdMap& kcs, double min_confidence) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return load_labeled_graphs(in, kcs, min_confidence);
}

void write_graphs(std::ostream& out, const KcRelationGraphs& g) {
  out << "grkt-graphs\t" << kGraphFormatVersion << '\n';
  out << "num_kcs\t" << g.num_kcs() << '\n';
  out << "eta\t" << std::setprecision(17) << g.eta << '\n';
  out << "min_cooccurrence\t" << g.min_cooccurrence << '\n';
  for (const auto& e : g.prerequisite_edges()) out << "P\t" << e.src << '\t' << e.dst << '\t' << e.score << '\n';
  for (const auto& e : g.similar_edges()) out << "R\t" << e.src << '\t' << e.dst << '\t' << e.score << '\n';
}

void write_graphs(const std::filesystem::path& path, const KcRelationGraphs& g) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_graphs(out, g);
}

KcRelationGraphs read_graphs(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t num_kcs = 0;
  double eta = 0;
  std::size_t min_co = 0;
  bool saw_header = false, saw_n = false;
  std::vector<ScoredEdge> pre, sim;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!saw_header) {
      int version = 0;
      if (key != "grkt-graphs" || !(ls >> version)) throw ParseError("not a graph file", line_no);
      if (version != kGraphFormatVersion) throw ParseError("unsupported graph format version", line_no);
      saw_header = true;
    } else if (key == "num_kcs") {
      if (!(ls >> num_kcs)) throw ParseError("bad num_kcs", line_no);
      saw_n = true;
    } else if (key == "eta") {
      if (!(ls >> eta)) throw ParseError("bad eta", line_no);
    } else if (key == "min_cooccurrence") {
      if (!(ls >> min_co)) throw ParseError("bad min_cooccurrence", line_no);
    } else if (key == "P" || key == "R" || key == "S") {
      ScoredEdge e;
      if (!(ls >> e.src >> e.dst >> e.score)) throw ParseError("bad edge row", line_no);
      if (!saw_n || e.src >= num_kcs || e.dst >= num_kcs) throw ParseError("edge outside KC range", line_no);
      if (key == "S") std::swap(e.src, e.dst);
      (key == "R" ? sim : pre).push_back(e);
    } else {
      throw ParseError("unknown graph record '" + key + "'", line_no);
    }
  }
  if (!saw_header || !saw_n) throw ParseError("incomplete graph file");
  auto g = KcRelationGraphs::from_edges(num_kcs, std::move(pre), std::move(sim));
  g.eta = eta;
  g.min_cooccurrence = min_co;
  return g;
}

KcRelationGraphs read_graphs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_graphs(in);
}

}  // namespace grkt
