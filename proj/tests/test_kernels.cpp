#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "homtom/errors.hpp"
#include "homtom/kernels.hpp"
#include "homtom/special.hpp"

using namespace homtom;
using std::complex;

namespace {

void check_close(complex<double> got, complex<double> want, double rel) {
  CAPTURE(got.real());
  CAPTURE(got.imag());
  CAPTURE(want.real());
  CAPTURE(want.imag());
  CHECK(std::abs(got - want) <= rel * std::max(1e-30, std::abs(want)));
}

}  // namespace

TEST_CASE("kernels against high-precision references, closed-form range") {
  check_close(kernel_fock(0, 0, 0.0, 0.0, 1.0), {2.0, 0.0}, 1e-13);
  check_close(kernel_fock(0, 0, 1.3, 0.0, 1.0),
              {-0.48096319138578098, 0.0}, 1e-12);
  check_close(kernel_fock(2, 5, 1.1, 0.7, 1.0),
              {1.2923606113275386, 2.2097383234643488}, 1e-12);
  check_close(kernel_fock(3, 3, 0.8, 0.0, 0.85),
              {-5.2589730762076279, 0.0}, 1e-12);
  check_close(kernel_fock(1, 4, 2.0, 1.1, 0.8),
              {0.18890885465810667, -0.030177386226959695}, 1e-11);
  check_close(kernel_fock(0, 1, 0.5, 0.25, 1.0),
              {1.9378248434212896, -0.49480791850904586}, 1e-12);
  check_close(kernel_fock(6, 6, 3.0, 2.0, 0.85),
              {-0.35305917248218268, 0.0}, 1e-11);
  check_close(kernel_fock(0, 27, 3.0, 0.0, 0.9),
              {-0.00052449992136395829, 0.0}, 1e-10);
}

TEST_CASE("kernels against high-precision references, quadrature range") {
  check_close(kernel_fock(27, 27, 6.0, 0.0, 0.9),
              {-0.11723954427059411, 0.0}, 1e-8);
  check_close(kernel_fock(27, 27, 0.5, 0.0, 0.9),
              {385.01128114027106, 0.0}, 1e-9);
  check_close(kernel_fock(20, 27, 4.0, 0.9, 0.9),
              {6.5399148696568874, -0.10997702454446285}, 1e-9);
}

TEST_CASE("ideal-detector diagonal kernel has a Dawson closed form") {
  // K_00(x; eta = 1) = 2 - 4 sqrt(2) x F(sqrt(2) x)
  for (double x : {-2.5, -0.3, 0.0, 0.9, 3.3}) {
    const double expected =
        2.0 - 4.0 * std::sqrt(2.0) * x * dawson(std::sqrt(2.0) * x);
    check_close(kernel_fock(0, 0, x, 1.7, 1.0), {expected, 0.0}, 1e-12);
  }
}

TEST_CASE("kernel phase dependence factorizes") {
  for (double phi : {0.4, 1.9, 2.9}) {
    for (auto [n, m] : {std::pair{0, 3}, std::pair{2, 4}, std::pair{5, 5}}) {
      const auto at_zero = kernel_fock(n, m, 0.8, 0.0, 0.9);
      const auto expected =
          at_zero * std::polar(1.0, -static_cast<double>(m - n) * phi);
      check_close(kernel_fock(n, m, 0.8, phi, 0.9), expected, 1e-12);
    }
  }
}

TEST_CASE("kernel swap symmetry is conjugation") {
  for (auto [n, m] : {std::pair{0, 2}, std::pair{1, 4}, std::pair{14, 17}}) {
    const auto a = kernel_fock(n, m, 1.2, 0.6, 0.85);
    const auto b = kernel_fock(m, n, 1.2, 0.6, 0.85);
    check_close(b, std::conj(a), 1e-12);
  }
}

TEST_CASE("kernel agrees with the spectral oracle") {
  // two routes: the production evaluator against the eigendecomposition
  // integral, on single Fock projectors and on a mixed operator
  for (double eta : {1.0, 0.85}) {
    for (auto [n, m] : {std::pair{0, 0}, std::pair{1, 3}, std::pair{4, 2}}) {
      Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(6, 6);
      op(n, m) = 1.0;
      for (double x : {-1.5, 0.7}) {
        const auto direct = kernel_fock(m, n, x, 0.9, eta);
        const auto oracle = kernel_oracle(op, x, 0.9, eta);
        check_close(oracle, direct, 2e-6);
      }
    }
  }
}

TEST_CASE("kernel bank matches elementwise evaluation") {
  const int dim = 7;
  const KernelBank bank(dim, 0.8);
  CHECK(bank.dim() == dim);
  Eigen::MatrixXcd out;
  Eigen::VectorXd diag;
  for (double x : {-2.0, 0.3, 1.8}) {
    bank.evaluate(x, 0.77, out);
    bank.evaluate_diagonal(x, diag);
    REQUIRE(out.rows() == dim);
    REQUIRE(diag.size() == dim);
    for (int n = 0; n < dim; ++n) {
      CHECK(diag[n] ==
            doctest::Approx(kernel_fock(n, n, x, 0.0, 0.8).real())
                .epsilon(1e-11));
      for (int m = 0; m < dim; ++m) {
        check_close(out(n, m), kernel_fock(n, m, x, 0.77, 0.8), 1e-11);
      }
    }
  }
}

TEST_CASE("kernel bank spans the quadrature fallback range") {
  const int dim = 16;  // pairs up to n + m = 30 cross the closed-form limit
  const KernelBank bank(dim, 0.9);
  Eigen::MatrixXcd out;
  bank.evaluate(1.1, 0.4, out);
  for (auto [n, m] : {std::pair{13, 15}, std::pair{15, 15}, std::pair{14, 15}}) {
    check_close(out(n, m), kernel_fock(n, m, 1.1, 0.4, 0.9), 1e-9);
    check_close(out(m, n), std::conj(out(n, m)), 1e-15);
  }
}

TEST_CASE("efficiency at or below one half is rejected") {
  CHECK_THROWS_AS(kernel_fock(0, 0, 0.0, 0.0, 0.5), EfficiencyTooLow);
  CHECK_THROWS_AS(kernel_fock(0, 0, 0.0, 0.0, 0.45), EfficiencyTooLow);
  CHECK_THROWS_AS(kernel_fock(2, 3, 1.0, 0.5, 0.1), EfficiencyTooLow);
  CHECK_THROWS_AS(KernelBank(4, 0.5), EfficiencyTooLow);
  CHECK_NOTHROW(kernel_fock(0, 0, 0.0, 0.0, 0.500001));
}

TEST_CASE("invalid kernel indices are rejected") {
  CHECK_THROWS_AS(kernel_fock(-1, 0, 0.0, 0.0, 0.9), IndexError);
  CHECK_THROWS_AS(kernel_fock(0, -2, 0.0, 0.0, 0.9), IndexError);
  CHECK_THROWS_AS(KernelBank(0, 0.9), DomainError);
}
