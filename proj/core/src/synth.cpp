#include "grkt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "grkt/errors.hpp"
#include "json.hpp"

namespace grkt {

void SynthConfig::validate() const {
  if (num_kcs < 2 || num_questions == 0 || num_students == 0) throw ConfigError("synth needs >= 2 KCs, questions, students");
  if (min_length == 0 || min_length > max_length) throw ConfigError("synth needs 0 < min_length <= max_length");
  if (cluster_size == 0) throw ConfigError("cluster_size must be positive");
  for (double p : {multi_kc_probability, guess, slip, long_gap_probability})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synth probabilities must lie in [0, 1]");
  if (guess + slip > 1.0) throw ConfigError("guess + slip must not exceed 1");
  if (!(decay_per_day >= 0.0)) throw ConfigError("decay rate must be non-negative");
  if (!(mean_gap_seconds > 0.0 && mean_long_gap_seconds > 0.0)) throw ConfigError("mean gaps must be positive");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct World {
  std::vector<std::size_t> rank_to_kc;
  std::vector<std::vector<std::size_t>> prerequisites;  // of each KC
  std::vector<std::vector<std::size_t>> dependents;     // KCs each KC is a prerequisite of
  std::vector<std::size_t> cluster;
  std::vector<std::vector<std::size_t>> cluster_members;
  std::vector<std::vector<std::size_t>> question_kcs;
  std::vector<std::vector<std::size_t>> questions_of_kc;  // by primary KC
  std::vector<double> difficulty;
};

World plant(const SynthConfig& cfg, std::mt19937_64& rng) {
  World w;
  const std::size_t n = cfg.num_kcs;
  w.rank_to_kc.resize(n);
  std::iota(w.rank_to_kc.begin(), w.rank_to_kc.end(), std::size_t{0});
  std::shuffle(w.rank_to_kc.begin(), w.rank_to_kc.end(), rng);
  w.prerequisites.resize(n);
  w.dependents.resize(n);
  for (std::size_t r = 1; r < n; ++r) {
    const std::size_t lo = r > cfg.prerequisite_window ? r - cfg.prerequisite_window : 0;
    std::vector<std::size_t> pool;
    for (std::size_t q = lo; q < r; ++q) pool.push_back(w.rank_to_kc[q]);
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t k = std::min(cfg.prerequisites_per_kc, pool.size());
    for (std::size_t i = 0; i < k; ++i) {
      w.prerequisites[w.rank_to_kc[r]].push_back(pool[i]);
      w.dependents[pool[i]].push_back(w.rank_to_kc[r]);
    }
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  w.cluster.resize(n);
  w.cluster_members.resize((n + cfg.cluster_size - 1) / cfg.cluster_size);
  for (std::size_t i = 0; i < n; ++i) {
    w.cluster[perm[i]] = i / cfg.cluster_size;
    w.cluster_members[i / cfg.cluster_size].push_back(perm[i]);
  }
  std::normal_distribution<double> diff(0.0, cfg.difficulty_sd);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  w.questions_of_kc.resize(n);
  for (std::size_t q = 0; q < cfg.num_questions; ++q) {
    // Every KC gets at least one question when |Q| >= |C|.
    const std::size_t primary = q < n ? q : std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::vector<std::size_t> kcs{primary};
    const auto& mates = w.cluster_members[w.cluster[primary]];
    if (mates.size() > 1 && u(rng) < cfg.multi_kc_probability) {
      std::size_t other = primary;
      while (other == primary) other = mates[std::uniform_int_distribution<std::size_t>(0, mates.size() - 1)(rng)];
      kcs.push_back(other);
    }
    std::sort(kcs.begin(), kcs.end());
    w.question_kcs.push_back(kcs);
    w.questions_of_kc[primary].push_back(q);
    w.difficulty.push_back(diff(rng));
  }
  return w;
}

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const World w = plant(cfg, rng);
  const std::size_t n = cfg.num_kcs;

  std::ostringstream csv;
  csv << "student,question,kcs,correct,timestamp\n";
  std::vector<std::vector<SynthTruth::Step>> truth(cfg.num_students);
  for (std::size_t s = 0; s < cfg.num_students; ++s) {
    // Per-student stream so students are independent of each other's draws.
    std::mt19937_64 srng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (s + 1)));
    std::normal_distribution<double> ability(0.0, cfg.ability_sd), cl(0.0, cfg.cluster_sd), own(0.0, cfg.kc_sd);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::exponential_distribution<double> gap(1.0 / cfg.mean_gap_seconds), long_gap(1.0 / cfg.mean_long_gap_seconds);
    const double a = ability(srng);
    std::vector<double> offsets(w.cluster_members.size());
    for (auto& o : offsets) o = cl(srng);
    std::vector<double> base(n), theta(n), effective(n);
    for (std::size_t c = 0; c < n; ++c) theta[c] = base[c] = a + offsets[w.cluster[c]] + own(srng) + cfg.initial_offset;

    const std::size_t len = std::uniform_int_distribution<std::size_t>(cfg.min_length, cfg.max_length)(srng);
    std::int64_t ts = 1'600'000'000 + static_cast<std::int64_t>(u(srng) * 86400.0 * 30);
    const double window = 3.0;
    for (std::size_t t = 0; t < len; ++t) {
      // Curriculum position sweeps the KC order once per sequence.
      const double pos = static_cast<double>(t) * static_cast<double>(n) / static_cast<double>(len);
      double r = pos + (u(srng) - 0.7) * window;
      if (u(srng) < 0.15) r = u(srng) * (pos + 1.0);  // revisit
      const auto rank = static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(n - 1)));
      const std::size_t kc = w.rank_to_kc[rank];
      const auto& pool = w.questions_of_kc[kc];
      const std::size_t q = pool.empty() ? std::uniform_int_distribution<std::size_t>(0, cfg.num_questions - 1)(srng)
                                         : pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(srng)];
      const auto& kcs = w.question_kcs[q];

      // Caps propagate along prerequisite chains in curriculum order.
      for (auto c : w.rank_to_kc) {
        effective[c] = theta[c];
        for (auto p : w.prerequisites[c]) effective[c] = std::min(effective[c], effective[p] + cfg.prerequisite_margin);
      }
      double m = 0;
      for (auto c : kcs) m += effective[c];
      m /= static_cast<double>(kcs.size());
      const double p_correct = cfg.guess + (1.0 - cfg.guess - cfg.slip) * sigmoid(m - w.difficulty[q]);
      const bool correct = u(srng) < p_correct;
      truth[s].push_back({theta, p_correct});

      csv << 'u' << s << ",q" << q << ',';
      for (std::size_t i = 0; i < kcs.size(); ++i) csv << (i ? ";" : "") << 'c' << kcs[i];
      csv << ',' << (correct ? 1 : 0) << ',' << ts << '\n';

      const double inc = cfg.learn_increment * (correct ? 1.0 : cfg.incorrect_factor);
      std::vector<double> delta(n, 0.0);
      for (auto c : kcs) {
        delta[c] += inc;
        for (auto d : w.dependents[c]) delta[d] += cfg.transfer * inc;
        for (auto d : w.cluster_members[w.cluster[c]])
          if (d != c) delta[d] += cfg.transfer * inc;
      }
      for (std::size_t c = 0; c < n; ++c) theta[c] += delta[c];

      const double g = u(srng) < cfg.long_gap_probability ? long_gap(srng) : gap(srng);
      const auto dt = static_cast<std::int64_t>(std::ceil(g));
      ts += dt;
      const double keep = std::exp(-cfg.decay_per_day * static_cast<double>(dt) / 86400.0);
      for (std::size_t c = 0; c < n; ++c) theta[c] = base[c] + (theta[c] - base[c]) * keep;
    }
  }

  SynthResult out;
  out.csv = csv.str();
  std::istringstream in(out.csv);
  out.dataset = ingest_csv(in);
  const auto& ds = out.dataset;

  // Generator KC index -> dataset KC id.
  std::vector<std::optional<KcId>> id(n);
  for (std::size_t c = 0; c < n; ++c) id[c] = ds.kcs.find("c" + std::to_string(c));
  std::vector<ScoredEdge> pre, sim;
  for (std::size_t c = 0; c < n; ++c) {
    if (!id[c]) continue;
    for (auto d : w.dependents[c])
      if (id[d]) pre.push_back({*id[c], *id[d], 1.0});
    for (auto d : w.cluster_members[w.cluster[c]])
      if (d > c && id[d]) sim.push_back({*id[c], *id[d], 1.0});
  }
  out.planted = KcRelationGraphs::from_edges(ds.num_kcs(), std::move(pre), std::move(sim));

  out.truth.steps.resize(ds.sequences.size());
  for (std::size_t s = 0; s < cfg.num_students; ++s) {
    auto sid = ds.students.find("u" + std::to_string(s));
    if (!sid) continue;
    for (auto& step : truth[s]) {
      std::vector<double> m(ds.num_kcs());
      for (std::size_t c = 0; c < n; ++c)
        if (id[c]) m[*id[c]] = step.mastery[c];
      out.truth.steps[*sid].push_back({std::move(m), step.p_correct});
    }
  }
  return out;
}

void write_truth_json(std::ostream& out, const SynthConfig& cfg, const SynthResult& r) {
  using nlohmann::json;
  const auto& ds = r.dataset;
  json pre = json::array(), sim = json::array();
  for (const auto& e : r.planted.prerequisite_edges()) pre.push_back({ds.kcs.name(e.src), ds.kcs.name(e.dst)});
  for (const auto& e : r.planted.similar_edges()) sim.push_back({ds.kcs.name(e.src), ds.kcs.name(e.dst)});
  json students = json::array();
  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    const auto& seq = ds.sequences[s];
    json steps = json::array();
    for (std::size_t t = 0; t < seq.valid_len && t < r.truth.steps[s].size(); ++t) {
      json m = json::array();
      for (auto c : seq.responses[t].kcs) m.push_back(r.truth.steps[s][t].mastery[c]);
      steps.push_back({{"mastery", m}, {"p_correct", r.truth.steps[s][t].p_correct}});
    }
    students.push_back({{"student", ds.students.name(seq.student)}, {"steps", steps}});
  }
  json config{{"num_kcs", cfg.num_kcs},
              {"num_questions", cfg.num_questions},
              {"num_students", cfg.num_students},
              {"min_length", cfg.min_length},
              {"max_length", cfg.max_length},
              {"multi_kc_probability", cfg.multi_kc_probability},
              {"prerequisites_per_kc", cfg.prerequisites_per_kc},
              {"prerequisite_window", cfg.prerequisite_window},
              {"cluster_size", cfg.cluster_size},
              {"ability_sd", cfg.ability_sd},
              {"cluster_sd", cfg.cluster_sd},
              {"kc_sd", cfg.kc_sd},
              {"difficulty_sd", cfg.difficulty_sd},
              {"initial_offset", cfg.initial_offset},
              {"learn_increment", cfg.learn_increment},
              {"incorrect_factor", cfg.incorrect_factor},
              {"transfer", cfg.transfer},
              {"prerequisite_margin", cfg.prerequisite_margin},
              {"decay_per_day", cfg.decay_per_day},
              {"mean_gap_seconds", cfg.mean_gap_seconds},
              {"long_gap_probability", cfg.long_gap_probability},
              {"mean_long_gap_seconds", cfg.mean_long_gap_seconds},
              {"guess", cfg.guess},
              {"slip", cfg.slip},
              {"seed", cfg.seed}};
  out << json{{"format", "grkt-synth-truth"}, {"version", 1}, {"config", config}, {"prerequisite", pre},
              {"similar", sim}, {"students", students}}
             .dump()
      << '\n';
}

RecoveryReport compare_graphs(const KcRelationGraphs& mined, const KcRelationGraphs& planted) {
  RecoveryReport r;
  auto pairs = [](const std::vector<ScoredEdge>& es) {
    std::set<std::pair<KcId, KcId>> s;
    for (const auto& e : es) s.emplace(e.src, e.dst);
    return s;
  };
  auto fill = [](const std::set<std::pair<KcId, KcId>>& m, const std::set<std::pair<KcId, KcId>>& p,
                 std::size_t& nm, std::size_t& np, std::size_t& hit, double& prec, double& rec) {
    nm = m.size();
    np = p.size();
    hit = 0;
    for (const auto& e : m) hit += p.count(e);
    prec = nm ? static_cast<double>(hit) / static_cast<double>(nm) : 1.0;
    rec = np ? static_cast<double>(hit) / static_cast<double>(np) : 1.0;
  };
  fill(pairs(mined.prerequisite_edges()), pairs(planted.prerequisite_edges()), r.mined_prerequisite,
       r.planted_prerequisite, r.matched_prerequisite, r.prerequisite_precision, r.prerequisite_recall);
  fill(pairs(mined.similar_edges()), pairs(planted.similar_edges()), r.mined_similar, r.planted_similar,
       r.matched_similar, r.similar_precision, r.similar_recall);
  return r;
}

RecoveryReport planted_graph_recovery_check(const Dataset& ds, const KcRelationGraphs& planted,
                                            const GraphBuildConfig& cfg) {
  return compare_graphs(build_graphs(ds, cfg), planted);
}

}  // namespace grkt
