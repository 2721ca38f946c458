#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "homtom/kernels.hpp"
#include "homtom/states.hpp"

namespace {

void closed_form_pair(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(homtom::kernel_fock(n, m, 1.1 + x, 0.7, 0.85));
    x += 1e-9;  // defeat value caching without changing the regime
  }
}
BENCHMARK(closed_form_pair)->Args({0, 0})->Args({3, 5})->Args({10, 14});

void quadrature_pair(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(homtom::kernel_fock(n, n, 2.0 + x, 0.3, 0.9));
    x += 1e-9;
  }
}
BENCHMARK(quadrature_pair)->Arg(16)->Arg(24)->Arg(32);

void bank_full_matrix(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const homtom::KernelBank bank(dim, 0.85);
  Eigen::MatrixXcd out(dim, dim);
  double x = 0.0;
  for (auto _ : state) {
    bank.evaluate(0.4 + x, 1.2, out);
    benchmark::DoNotOptimize(out.data());
    x += 1e-9;
  }
}
BENCHMARK(bank_full_matrix)->Arg(4)->Arg(8)->Arg(12);

void smeared_diagonal(benchmark::State& state) {
  const int nmax = static_cast<int>(state.range(0));
  const homtom::SmearedProductTable table(nmax, 0.9);
  Eigen::VectorXd out(nmax + 1);
  double x = 0.0;
  for (auto _ : state) {
    table.evaluate_diagonal(0.8 + x, out);
    benchmark::DoNotOptimize(out.data());
    x += 1e-9;
  }
}
BENCHMARK(smeared_diagonal)->Arg(7)->Arg(27)->Arg(54);

}  // namespace

BENCHMARK_MAIN();
