#include <benchmark/benchmark.h>

#include "homtom/adaptive.hpp"
#include "homtom/averaging.hpp"
#include "homtom/kernels.hpp"
#include "homtom/maxlik.hpp"
#include "homtom/states.hpp"

namespace {

std::vector<homtom::QuadratureSample> coherent_samples(std::size_t count) {
  const auto model = homtom::StateModel::coherent({1.0, 0.0});
  const homtom::DetectorModel detector(0.8);
  return homtom::sample_quadratures(model, detector, count, 42);
}

void kernel_mean(benchmark::State& state) {
  const auto samples = coherent_samples(static_cast<std::size_t>(state.range(0)));
  const homtom::KernelFn fn = [](double x, double phi) {
    return homtom::kernel_fock(0, 0, x, phi, 0.8);
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(homtom::estimate_expectation(samples, fn));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(kernel_mean)->Arg(10000)->Arg(100000);

void full_averaging(benchmark::State& state) {
  const auto samples = coherent_samples(20000);
  const int dim = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        homtom::reconstruct_density_matrix(samples, dim, 0.8));
  }
}
BENCHMARK(full_averaging)->Arg(4)->Arg(8);

void adapt_fit(benchmark::State& state) {
  const auto samples = coherent_samples(static_cast<std::size_t>(state.range(0)));
  const homtom::KernelFn base = [](double x, double phi) {
    return homtom::kernel_fock(1, 1, x, phi, 0.8);
  };
  const auto basis = homtom::NullBasis::default_basis();
  for (auto _ : state) {
    benchmark::DoNotOptimize(homtom::adapt(samples, base, basis));
  }
}
BENCHMARK(adapt_fit)->Arg(10000)->Arg(50000);

void ml_fit(benchmark::State& state) {
  const auto samples = coherent_samples(static_cast<std::size_t>(state.range(0)));
  homtom::MlConfig config;
  config.dim = 6;
  config.eta = 0.8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(homtom::ml_reconstruct(samples, config));
  }
}
BENCHMARK(ml_fit)->Arg(2000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
