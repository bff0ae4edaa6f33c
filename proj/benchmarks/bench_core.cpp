#include <benchmark/benchmark.h>

#include "rank1/amp.hpp"
#include "rank1/oracle.hpp"
#include "rank1/potential.hpp"
#include "rank1/prior.hpp"
#include "rank1/state_evolution.hpp"

using namespace rank1;

namespace {
const DiscretePrior& wb() {
  static DiscretePrior p = make_prior({0.0, 1.0}, {0.98, 0.02});
  return p;
}
}  // namespace

static void BM_ScalarMmse(benchmark::State& state) {
  QuadratureRule quad = gauss_hermite(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mmse(wb(), 25.0, quad));
}
BENCHMARK(BM_ScalarMmse)->Arg(61)->Arg(201)->Arg(301);

static void BM_Potential(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(i_rs(wb(), 0.005, 0.0011));
}
BENCHMARK(BM_Potential);

static void BM_StationaryPoints(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(stationary_points(wb(), 0.0011));
}
BENCHMARK(BM_StationaryPoints);

static void BM_Thresholds(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(compute_thresholds(wb()));
}
BENCHMARK(BM_Thresholds)->Unit(benchmark::kMillisecond);

static void BM_StateEvolution(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(se_run(wb(), 0.0008));
}
BENCHMARK(BM_StateEvolution);

static void BM_CoupledStateEvolution(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(coupled_se_run(wb(), 40, 2, 0.001));
}
BENCHMARK(BM_CoupledStateEvolution)->Unit(benchmark::kMillisecond);

static void BM_AmpRun(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Instance inst = generate_instance(wb(), n, 0.0008, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(amp_run(inst, wb(), 200, 1e-7));
  state.SetComplexityN(n);
}
BENCHMARK(BM_AmpRun)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_Spectral(benchmark::State& state) {
  DiscretePrior rad = make_prior({-1.0, 1.0}, {0.5, 0.5});
  Instance inst = generate_instance(rad, 1000, 0.1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(spectral_estimate(inst));
  state.SetComplexityN(inst.n);
}
BENCHMARK(BM_Spectral)->Unit(benchmark::kMillisecond);

static void BM_Enumeration(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  DiscretePrior half = make_prior({0.0, 1.0}, {0.5, 0.5});
  Instance inst = generate_instance(half, n, 1.0, 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(exact_posterior(inst, half, 1));
}
BENCHMARK(BM_Enumeration)->Arg(8)->Arg(10)->Arg(12)->Unit(benchmark::kMillisecond);

static void BM_McMmse(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(mc_mmse(wb(), 25.0, 100000, 3));
}
BENCHMARK(BM_McMmse)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
