#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "predset/objective.hpp"
#include "predset/optimizer.hpp"
#include "predset/simgen.hpp"
#include "predset/verify.hpp"

using namespace predset;

namespace {

RandomInstance instance(std::size_t l) {
  RngStream rng(42, "bench/" + std::to_string(l));
  return random_instance(l, rng);
}

void BM_Greedy(benchmark::State& state) {
  const auto inst = instance(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(greedy_set(inst.f, inst.confusion));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Greedy)->RangeMultiplier(2)->Range(4, 128)->Complexity();

void BM_BruteForce(benchmark::State& state) {
  const auto inst = instance(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_set(inst.f, inst.confusion));
}
BENCHMARK(BM_BruteForce)->DenseRange(6, 16, 2)->Unit(benchmark::kMillisecond);

void BM_ExpectedAccuracy(benchmark::State& state) {
  const auto l = static_cast<std::size_t>(state.range(0));
  const auto inst = instance(l);
  std::vector<LabelId> all(l);
  std::iota(all.begin(), all.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(expected_accuracy(all, inst.f, inst.confusion));
}
BENCHMARK(BM_ExpectedAccuracy)->RangeMultiplier(4)->Range(4, 256);

void BM_IncrementalCommit(benchmark::State& state) {
  const auto l = static_cast<std::size_t>(state.range(0));
  const auto inst = instance(l);
  for (auto _ : state) {
    ObjectiveState s(l);
    for (LabelId y = 0; y < l; ++y) s.commit(y, inst.f, inst.confusion);
    benchmark::DoNotOptimize(s.value());
  }
}
BENCHMARK(BM_IncrementalCommit)->RangeMultiplier(4)->Range(4, 256);

void BM_TrainSoftmax(benchmark::State& state) {
  TaskConfig cfg{.label_count = 10, .d_total = 20, .d_informative = 4, .class_sep = 1.0,
                 .train = static_cast<std::size_t>(state.range(0)), .calib = 10, .test = 10, .seed = 0};
  const auto task = gen_task(cfg, RngStream(7, "bench/train"));
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_softmax(task.data, {.epochs = 50}));
  }
}
BENCHMARK(BM_TrainSoftmax)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
