// Microbenchmarks for the hot paths: stationary-distribution solves (dense vs
// matrix-free), arrival sampling, the inversion solver, and the matched filter.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "deadtime/correction.hpp"
#include "deadtime/estimators.hpp"
#include "deadtime/events.hpp"
#include "deadtime/markov.hpp"
#include "deadtime/model.hpp"

namespace {

deadtime::SceneModel reference_scene() {
  deadtime::SceneModel m;
  m.t_r = 100.0;
  m.t_d = 75.0;
  m.sigma = 2.0;
  m.signal = 3.16;
  m.background = 0.562;
  m.tau = 50.025;
  return m;
}

void BM_StationaryDense(benchmark::State& state) {
  const deadtime::SceneModel m = reference_scene();
  const deadtime::BinGrid grid = deadtime::BinGrid::make(m, static_cast<int>(state.range(0)));
  const deadtime::TransitionKernel kernel =
      deadtime::build_kernel(m, grid, deadtime::TransitionKernel::Mode::dense);
  for (auto _ : state) {
    benchmark::DoNotOptimize(deadtime::stationary_distribution(kernel).pdf);
  }
}
BENCHMARK(BM_StationaryDense)->Arg(200)->Arg(1000);

void BM_StationaryMatrixFree(benchmark::State& state) {
  const deadtime::SceneModel m = reference_scene();
  const deadtime::BinGrid grid = deadtime::BinGrid::make(m, static_cast<int>(state.range(0)));
  const deadtime::TransitionKernel kernel =
      deadtime::build_kernel(m, grid, deadtime::TransitionKernel::Mode::matrix_free);
  for (auto _ : state) {
    benchmark::DoNotOptimize(deadtime::stationary_distribution(kernel).pdf);
  }
}
BENCHMARK(BM_StationaryMatrixFree)->Arg(200)->Arg(1000)->Arg(2000);

void BM_SampleArrivals(benchmark::State& state) {
  const deadtime::SceneModel m = reference_scene();
  const deadtime::ArrivalSampler sampler(m);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampler.sample(static_cast<std::uint64_t>(state.range(0)), seed++));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleArrivals)->Arg(1000)->Arg(10000);

void BM_SolveInversion(benchmark::State& state) {
  const deadtime::SceneModel m = reference_scene();
  const int n_b = static_cast<int>(state.range(0));
  const deadtime::BinGrid grid = deadtime::BinGrid::make(m, n_b);
  const deadtime::BinnedHistogram hist = deadtime::bin_detections(
      deadtime::apply_dead_time(deadtime::sample_arrivals(m, 20000, 5), m.t_d), grid);
  const deadtime::InverseProblem p =
      deadtime::make_inverse_problem(hist.normalized(), m.total_flux(), grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(deadtime::solve_mchc(p, 0.0, 200));
  }
}
BENCHMARK(BM_SolveInversion)->Arg(200)->Arg(2000);

void BM_MatchedFilter(benchmark::State& state) {
  const deadtime::SceneModel m = reference_scene();
  const int n_b = static_cast<int>(state.range(0));
  const deadtime::BinGrid grid = deadtime::BinGrid::make(m, n_b);
  const deadtime::BinnedHistogram hist = deadtime::bin_detections(
      deadtime::apply_dead_time(deadtime::sample_arrivals(m, 20000, 6), m.t_d), grid);
  const std::vector<double> reference = deadtime::arrival_pdf(m, grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(deadtime::log_matched_filter(hist, reference, m.tau));
  }
}
BENCHMARK(BM_MatchedFilter)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
