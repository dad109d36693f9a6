#include <benchmark/benchmark.h>

#include "quartree/learn/train.hpp"
#include "quartree/metrics.hpp"
#include "quartree/reconstruct.hpp"
#include "quartree/simulate.hpp"

using namespace quartree;

static void BM_NeighborJoining(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = path_distance_matrix(sample_edge_lengths(random_binary_topology(n, 1), 2.0, 2));
  for (auto _ : state) benchmark::DoNotOptimize(neighbor_joining(d));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NeighborJoining)->RangeMultiplier(2)->Range(64, 512)->Unit(benchmark::kMillisecond)->Complexity();

static void BM_ExactQuartetDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tree a = random_binary_topology(n, 3);
  const Tree b = random_binary_topology(n, 4).with_leaf_order(a.leaf_labels());
  QdMode exact;
  exact.exact_limit = UINT64_MAX;
  for (auto _ : state) benchmark::DoNotOptimize(quartet_distance(a, b, exact));
}
BENCHMARK(BM_ExactQuartetDistance)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

// One optimizer step at the acceptance scale: 32 leaves, 220 features.
static void BM_TrainingStep(benchmark::State& state) {
  const Tree truth = sample_edge_lengths(full_binary_topology(5), 2.0, 5);
  Rng rng(6);
  FeatureTable x = brownian_signals(truth, 220, rng);
  ModelConfig mc;
  mc.input_dim = x.cols();
  mc.hidden = {64};
  mc.output_dim = 32;
  TrainConfig tc;
  tc.optimizer.steps = 1;
  tc.loss.quartets_per_step = static_cast<std::size_t>(state.range(0));
  const auto sup = Supervision::supervised(truth);
  const EmbeddingModel model(mc, 7);
  for (auto _ : state) benchmark::DoNotOptimize(train(model, x, nullptr, sup, tc, 8));
}
BENCHMARK(BM_TrainingStep)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
