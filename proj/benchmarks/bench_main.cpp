#include <random>

#include <benchmark/benchmark.h>

#include "leosop/correlator.hpp"
#include "leosop/nav.hpp"
#include "leosop/phase_tracker.hpp"
#include "leosop/scenario.hpp"

using namespace leosop;

namespace {

ComplexVector noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ComplexVector x(n);
  for (auto& v : x) v = {g(rng), g(rng)};
  return x;
}

void BM_CorrelateEstimatorGrid(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ComplexVector b = noise(n, 1);
  const ComplexVector r = noise(n, 2);
  const BeaconCorrelator bc(b);
  const FrequencyGrid grid{-10.0, 10.0, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(bc.correlate(r, grid, 1.0 / 3.75e6));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.size()));
}
BENCHMARK(BM_CorrelateEstimatorGrid)->Arg(4096)->Arg(5000)->Arg(21744)->Unit(benchmark::kMillisecond);

void BM_CorrelateWideGrid(benchmark::State& state) {
  const ComplexVector b = noise(5000, 3);
  const ComplexVector r = noise(5000, 4);
  const BeaconCorrelator bc(b);
  const FrequencyGrid grid{-300e3, 300e3, static_cast<double>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(bc.correlate(r, grid, 1.0 / 3.75e6));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.size()));
}
BENCHMARK(BM_CorrelateWideGrid)->Arg(1000)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_CorrelateOracle(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ComplexVector b = noise(n, 5);
  const ComplexVector r = noise(n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(correlate_oracle(b, r, FrequencyGrid::single(0.0), 1e-6));
}
BENCHMARK(BM_CorrelateOracle)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_KalmanCycle(benchmark::State& state) {
  KFConfig cfg;
  TrackState s = cfg.initial_state();
  double df = 0.1;
  for (auto _ : state) {
    s = update(predict(s, cfg), df, cfg);
    df = -df;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_KalmanCycle);

void BM_SolveStatic(benchmark::State& state) {
  const Vec3 rx = geodetic_to_ecef(0.78, 0.13, 250.0);
  const Vec3 up = rx.normalized();
  const Vec3 east = Vec3::UnitZ().cross(up).normalized();
  const Vec3 north = up.cross(east);
  std::vector<OrbitSpec> orbits{
      orbit_through("A", kEarthRadius + 550e3, 0.92, rx + east * 4e5, 60.0, true),
      orbit_through("B", kEarthRadius + 550e3, 1.70, rx - east * 3e5, 210.0, false),
      orbit_through("C", kEarthRadius + 550e3, 1.22, rx + north * 4.5e5, 360.0, true)};
  PVTState truth;
  truth.p = rx;
  std::vector<RangeRateObservation> obs;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 600.0 * static_cast<double>(i) / static_cast<double>(n);
    const StateVector sv = propagate(orbits[i % orbits.size()], t);
    obs.push_back({sv, range_rate_model(sv, truth), orbits[i % orbits.size()].sv_id, t});
  }
  PVTState s0;
  s0.p = rx + east * 4e4;
  for (auto _ : state) benchmark::DoNotOptimize(solve_ls(obs, s0, NavConfig{}));
}
BENCHMARK(BM_SolveStatic)->Arg(300)->Arg(3000)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
