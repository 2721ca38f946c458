#include <benchmark/benchmark.h>

#include "homtom/calibration.hpp"
#include "homtom/states.hpp"

namespace {

void sample_coherent(benchmark::State& state) {
  const auto model = homtom::StateModel::coherent({1.0, 0.0});
  const homtom::DetectorModel detector(0.8);
  const auto count = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        homtom::sample_quadratures(model, detector, count, seed++));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(sample_coherent)->Arg(1000)->Arg(10000);

void sample_thermal(benchmark::State& state) {
  const auto model = homtom::StateModel::thermal(1.5);
  const homtom::DetectorModel detector(1.0);
  const auto count = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        homtom::sample_quadratures(model, detector, count, seed++));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(sample_thermal)->Arg(10000);

void joint_twin_beam(benchmark::State& state) {
  const auto count = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        homtom::simulate_joint({0.88, 0.0}, 0.8, 1.0, 0.9, count, seed++));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(joint_twin_beam)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
