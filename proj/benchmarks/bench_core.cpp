#include <benchmark/benchmark.h>

#include "gora/goal.hpp"
#include "gora/optimizer.hpp"
#include "gora/renewal.hpp"
#include "gora/simulator.hpp"

namespace {

const gora::GoalFunction& bimodal() {
  static const auto h = gora::make_goal(
      {0, 10, 40}, {{0, 0, 0.01}, {1, -0.053333333333333333, 8.8888888888888889e-4}, {0.2, 0, 0.002}});
  return h;
}

void BM_CycleMomentsClosedForm(benchmark::State& state) {
  const double ps = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gora::cycle_moments(bimodal(), 5, 20, 1.0, ps));
}
BENCHMARK(BM_CycleMomentsClosedForm)->Arg(10)->Arg(100)->Arg(1000);

void BM_CycleMomentsTermByTerm(benchmark::State& state) {
  const double ps = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gora::cycle_moments_reference(bimodal(), 5, 20, 1.0, ps));
}
BENCHMARK(BM_CycleMomentsTermByTerm)->Arg(10)->Arg(100)->Arg(1000);

void BM_SteadyState(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gora::steady_state_ps(n, 1.0 / n, 2.0 * n));
}
BENCHMARK(BM_SteadyState)->Arg(10)->Arg(100)->Arg(1000);

void BM_Optimize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(gora::optimize(bimodal(), 100, 1.0));
}
BENCHMARK(BM_Optimize)->Unit(benchmark::kMillisecond);

void BM_SimulatorSlots(benchmark::State& state) {
  gora::SimConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  cfg.gamma = 2 * cfg.n;
  cfg.tau = 1.0 / cfg.n;
  cfg.horizon = 100'000;
  for (auto _ : state) benchmark::DoNotOptimize(gora::run(cfg, bimodal()));
  state.SetItemsProcessed(state.iterations() * cfg.horizon);
}
BENCHMARK(BM_SimulatorSlots)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
