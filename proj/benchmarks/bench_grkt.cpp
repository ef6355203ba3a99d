#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "grkt/metrics.hpp"
#include "grkt/model.hpp"
#include "grkt/synth.hpp"
#include "grkt/training.hpp"

namespace {

using namespace grkt;

const SynthResult& synth(std::size_t kcs) {
  static std::map<std::size_t, SynthResult> cache;
  auto it = cache.find(kcs);
  if (it == cache.end()) {
    SynthConfig sc;
    sc.num_kcs = kcs;
    sc.num_questions = 4 * kcs;
    sc.num_students = 200;
    sc.min_length = sc.max_length = 100;
    sc.seed = 1;
    it = cache.emplace(kcs, generate(sc)).first;
  }
  return it->second;
}

HyperParams hyper(std::size_t layers) {
  HyperParams hp;
  hp.embed_dim = 32;
  hp.memory_dim = 16;
  hp.hidden_dim = 32;
  hp.layers = layers;
  return hp;
}

// args: KCs, GNN layers
void BM_ForwardSequence(benchmark::State& state) {
  const auto& s = synth(state.range(0));
  auto store = init_parameters(s.dataset.num_questions(), s.dataset.num_kcs(), hyper(state.range(1)));
  GrktModel model(store, s.planted);
  const auto& seq = s.dataset.sequences[0];
  for (auto _ : state) benchmark::DoNotOptimize(forward_sequence(model, seq).loss_sum);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(seq.valid_len));
}
BENCHMARK(BM_ForwardSequence)->Args({20, 1})->Args({50, 1})->Args({50, 2})->Args({50, 3})->Args({120, 2});

void BM_SequenceGradient(benchmark::State& state) {
  const auto& s = synth(state.range(0));
  auto store = init_parameters(s.dataset.num_questions(), s.dataset.num_kcs(), hyper(state.range(1)));
  GrktModel model(store, s.planted);
  const auto& seq = s.dataset.sequences[0];
  for (auto _ : state) benchmark::DoNotOptimize(sequence_gradient(model, seq).loss_sum);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(seq.valid_len));
}
BENCHMARK(BM_SequenceGradient)->Args({20, 1})->Args({50, 1})->Args({50, 3});

void BM_BuildGraphs(benchmark::State& state) {
  const auto& s = synth(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_graphs(s.dataset, {}).num_kcs());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.dataset.num_responses()));
}
BENCHMARK(BM_BuildGraphs)->Arg(20)->Arg(50)->Arg(120);

void BM_Auc(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> scores(state.range(0));
  std::vector<std::uint8_t> labels(state.range(0));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = u(rng);
    labels[i] = u(rng) < 0.5;
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->Arg(1 << 10)->Arg(1 << 16);

void BM_TrainEpoch(benchmark::State& state) {
  const auto& s = synth(20);
  auto ds = preprocess(s.dataset, 100, 10);
  TrainConfig cfg;
  cfg.hyper = hyper(1);
  cfg.max_epochs = 1;
  const auto fold = make_folds(ds, 5, 0.1, 0)[0];
  const auto graphs = graphs_for_fold(ds, fold, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(train_fold(ds, fold, cfg, graphs).report.epochs.size());
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
