#include "grkt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "grkt/errors.hpp"

namespace grkt {

GradCheckReport grad_check(ParameterStore& store, const Objective& f, const GradCheckOptions& opt) {
  const Gradients g = f.gradient();
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < store.size(); ++i)
    for (std::size_t k = 0; k < store[i].value.size(); ++k) coords.emplace_back(i, k);
  std::mt19937_64 rng(opt.seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(std::min(coords.size(), opt.samples));
  std::sort(coords.begin(), coords.end());

  GradCheckReport rep;
  std::map<std::size_t, GradCheckGroup> groups;
  for (auto [i, k] : coords) {
    auto& grp = groups[i];
    grp.name = store[i].name;
    const auto& m = store[i].value;
    const std::size_t r = k / m.cols, c = k % m.cols;
    double analytic = 0;
    if (g.dense[i].size() != 0) analytic += g.dense[i].data[k];
    if (auto it = g.sparse[i].find(r); it != g.sparse[i].end()) analytic += it->second[c];

    double& x = store[i].value.data[k];
    const double x0 = x;
    std::vector<char> sig_plus, sig_minus;
    x = x0 + opt.step;
    const double fp = f.value(&sig_plus);
    x = x0 - opt.step;
    const double fm = f.value(&sig_minus);
    x = x0;
    if (sig_plus != sig_minus) {
      ++grp.skipped;
      ++rep.skipped;
      continue;
    }
    const double numeric = (fp - fm) / (2 * opt.step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
    const double err = std::abs(analytic - numeric) / denom;
    ++grp.checked;
    ++rep.checked;
    grp.max_rel_error = std::max(grp.max_rel_error, err);
    rep.max_rel_error = std::max(rep.max_rel_error, err);
  }
  for (auto& [_, grp] : groups) rep.groups.push_back(grp);
  rep.passed = rep.checked > 0 && rep.max_rel_error < opt.tolerance;
  return rep;
}

Objective sequence_objective(const GrktModel& model, const std::vector<ResponseSequence>& sequences) {
  Objective f;
  f.value = [&model, &sequences](std::vector<char>* sig) {
    double total = 0;
    SequenceOptions opt;
    opt.mode = Mode::kTrain;
    for (const auto& s : sequences) {
      auto res = forward_sequence(model, s, opt);
      total += res.loss_sum;
      if (sig) sig->insert(sig->end(), res.signature.begin(), res.signature.end());
    }
    return total;
  };
  f.gradient = [&model, &sequences]() {
    Gradients total(model.store().size());
    ParameterStore scratch;
    std::vector<Matrix> acc(model.store().size());
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] = Matrix(model.store()[i].value.rows, model.store()[i].value.cols);
    for (const auto& s : sequences) {
      auto g = sequence_gradient(model, s, 1.0, Mode::kTrain);
      for (std::size_t i = 0; i < acc.size(); ++i) {
        if (g.grads.dense[i].size() != 0)
          for (std::size_t k = 0; k < acc[i].size(); ++k) acc[i].data[k] += g.grads.dense[i].data[k];
        for (const auto& [r, row] : g.grads.sparse[i])
          for (std::size_t c = 0; c < row.size(); ++c) acc[i](r, c) += row[c];
      }
    }
    total.dense = std::move(acc);
    return total;
  };
  return f;
}

DeskGradCheckConfig::DeskGradCheckConfig() {
  hyper.embed_dim = 4;
  hyper.memory_dim = 4;
  hyper.hidden_dim = 6;
  hyper.layers = 1;
  hyper.seed = 7;
}

GradCheckReport desk_grad_check(const DeskGradCheckConfig& cfg) {
  std::mt19937_64 rng(cfg.hyper.seed ^ 0xabcdefULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = cfg.num_kcs;
  std::vector<ScoredEdge> pre, sim;
  for (KcId a = 0; a < n; ++a)
    for (KcId b = 0; b < n; ++b) {
      if (a == b) continue;
      if (u(rng) < cfg.edge_probability / 2) pre.push_back({a, b, 1.0});
      if (a < b && u(rng) < cfg.edge_probability / 2) sim.push_back({a, b, 1.0});
    }
  auto graphs = KcRelationGraphs::from_edges(n, pre, sim);

  std::vector<std::vector<KcId>> qk(cfg.num_questions);
  for (auto& kcs : qk) {
    kcs.push_back(static_cast<KcId>(rng() % n));
    if (u(rng) < 0.3) kcs.push_back(static_cast<KcId>(rng() % n));
    std::sort(kcs.begin(), kcs.end());
    kcs.erase(std::unique(kcs.begin(), kcs.end()), kcs.end());
  }
  std::vector<ResponseSequence> seqs(cfg.num_sequences);
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    std::int64_t ts = 0;
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
      auto q = static_cast<QuestionId>(rng() % cfg.num_questions);
      ts += 30 + static_cast<std::int64_t>(u(rng) * 600);
      seqs[s].responses.push_back({q, qk[q], static_cast<std::uint8_t>(u(rng) < 0.5), ts});
    }
    seqs[s].valid_len = cfg.seq_len;
  }

  auto store = init_parameters(cfg.num_questions, n, cfg.hyper);
  // Nonzero raw constrained parameters and memory so every path carries gradient.
  std::normal_distribution<double> nd(0.0, 0.3);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& name = store[i].name;
    if (name == "w_h_raw" || name == "H0" || name.rfind("gnn.rtv", 0) == 0 || name.find(".b") != std::string::npos)
      for (auto& v : store[i].value.data) v += nd(rng);
  }
  GrktModel model(store, graphs);
  return grad_check(store, sequence_objective(model, seqs), cfg.check);
}

}  // namespace grkt
