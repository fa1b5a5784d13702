#include <benchmark/benchmark.h>

#include <vector>

#include "qaction/dynamics.hpp"
#include "qaction/fit.hpp"
#include "qaction/path.hpp"
#include "qaction/propagator.hpp"

using namespace qaction;

namespace {

const ActionSpec kDoubleWell = make_action(1.0, Potential1D{0.5, -1.0, 0.5});
const ActionSpec kPE = make_action(1.0, Potential2D{0.0, 0.5, 0.05, 0.0});

void BM_SplitStep1D(benchmark::State& state) {
  const SpatialGrid grid = default_grid(1);
  ImaginaryTimeEvolver ev(kDoubleWell, grid, 5e-4, state.range(0) != 0);
  auto values = discrete_delta(grid, Point{0.0, 0.0});
  for (auto _ : state) {
    ev.advance(values, 100);
    benchmark::DoNotOptimize(values.data());
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_SplitStep1D)->Arg(0)->Arg(1)->ArgNames({"extended"});

void BM_SplitStep2D(benchmark::State& state) {
  const SpatialGrid grid = default_grid(2);
  ImaginaryTimeEvolver ev(kPE, grid, 1e-3);
  auto values = discrete_delta(grid, Point{1.0, 0.0});
  for (auto _ : state) {
    ev.advance(values, 10);
    benchmark::DoNotOptimize(values.data());
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_SplitStep2D);

void BM_PathSolve(benchmark::State& state) {
  for (auto _ : state) {
    auto p = solve_euclidean_path(kDoubleWell, Point{-1.5, 0.0}, Point{0.9, 0.0}, 4.0);
    benchmark::DoNotOptimize(p.slices.data());
  }
}
BENCHMARK(BM_PathSolve)->Unit(benchmark::kMillisecond);

void BM_FitObjective(benchmark::State& state) {
  const auto table = amplitude_table(kDoubleWell, default_grid(1), 1.0, default_boundary_set(1), EvolutionSettings{5e-4});
  const auto probe = make_action(0.9, Potential1D{0.0, -0.8, 0.45}, ActionKind::Quantum);
  for (auto _ : state) benchmark::DoNotOptimize(fit_objective(table, probe, FitConfig{}));
}
BENCHMARK(BM_FitObjective)->Unit(benchmark::kMillisecond);

void BM_Rk4Step(benchmark::State& state) {
  PhaseState s{1.0, 0.0, 2.0, 5.0};
  for (auto _ : state) {
    s = rk4_step(kPE, s, 1e-3);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_Rk4Step);

}  // namespace

BENCHMARK_MAIN();
