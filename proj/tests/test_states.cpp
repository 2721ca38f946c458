#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "homtom/errors.hpp"
#include "homtom/states.hpp"

using namespace homtom;

namespace {

// Simpson rule on a uniform grid; count must be odd.
double simpson(double lo, double hi, int count,
               const std::function<double(double)>& f) {
  const double h = (hi - lo) / (count - 1);
  double sum = f(lo) + f(hi);
  for (int i = 1; i < count - 1; ++i) {
    sum += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

// Independent route to the smeared product: direct convolution of the
// wavefunction product with the efficiency Gaussian.
double convolved_product(int n, int m, double x, double eta) {
  const double delta2 = (1.0 - eta) / (4.0 * eta);
  const double norm = 1.0 / std::sqrt(2.0 * std::acos(-1.0) * delta2);
  return simpson(-12.0, 12.0, 4801, [&](double t) {
    const double gauss = norm * std::exp(-(x - t) * (x - t) / (2.0 * delta2));
    return gauss * fock_wavefunction(n, t) * fock_wavefunction(m, t);
  });
}

}  // namespace

TEST_CASE("oscillator wavefunctions against high-precision references") {
  CHECK(fock_wavefunction(0, 0.0) ==
        doctest::Approx(0.89324384173800233).epsilon(1e-14));
  CHECK(fock_wavefunction(0, 0.7) ==
        doctest::Approx(0.54722475389138758).epsilon(1e-14));
  CHECK(fock_wavefunction(25, 1.3) ==
        doctest::Approx(0.1465705395498204).epsilon(1e-13));
  CHECK(fock_wavefunction(60, 0.9) ==
        doctest::Approx(0.047860565931898396).epsilon(1e-13));
  CHECK(fock_wavefunction(7, -2.1) ==
        doctest::Approx(-0.45071123653066108).epsilon(1e-13));
}

TEST_CASE("wavefunction batch agrees with single evaluations") {
  const auto all = fock_wavefunctions(40, -1.37);
  REQUIRE(all.size() == 41);
  for (int n : {0, 1, 7, 23, 40}) {
    CHECK(all[static_cast<std::size_t>(n)] ==
          doctest::Approx(fock_wavefunction(n, -1.37)).epsilon(1e-14));
  }
}

TEST_CASE("wavefunctions are orthonormal under the vacuum-1/4 convention") {
  for (int n = 0; n <= 8; ++n) {
    for (int m = n; m <= 8; ++m) {
      const double overlap = simpson(-10.0, 10.0, 4001, [&](double x) {
        return fock_wavefunction(n, x) * fock_wavefunction(m, x);
      });
      CHECK(overlap == doctest::Approx(n == m ? 1.0 : 0.0).epsilon(1e-9));
    }
  }
  // vacuum variance 1/4
  const double var = simpson(-10.0, 10.0, 4001, [](double x) {
    const double psi = fock_wavefunction(0, x);
    return x * x * psi * psi;
  });
  CHECK(var == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("smeared products against high-precision references") {
  CHECK(smeared_fock_product(0, 0, 0.3, 0.8) ==
        doctest::Approx(0.61794048527745700).epsilon(1e-13));
  CHECK(smeared_fock_product(2, 7, 1.4, 0.85) ==
        doctest::Approx(-0.14882721449375108).epsilon(1e-13));
  CHECK(smeared_fock_product(27, 27, 3.0, 0.9) ==
        doctest::Approx(0.075324949692236330).epsilon(1e-9));
  CHECK(smeared_fock_product(5, 5, 0.0, 0.75) ==
        doctest::Approx(0.13352471645828224).epsilon(1e-12));
  CHECK(smeared_fock_product(13, 20, 2.2, 1.0) ==
        doctest::Approx(0.09519890011290573).epsilon(1e-12));
}

TEST_CASE("smeared products agree with direct convolution") {
  for (double eta : {0.8, 0.95}) {
    for (int n : {0, 1, 4}) {
      for (int m : {0, 3, 6}) {
        for (double x : {-1.7, 0.0, 0.9, 2.6}) {
          CAPTURE(n);
          CAPTURE(m);
          CAPTURE(x);
          CAPTURE(eta);
          const double direct = convolved_product(n, m, x, eta);
          CHECK(smeared_fock_product(n, m, x, eta) ==
                doctest::Approx(direct).epsilon(1e-8));
        }
      }
    }
  }
}

TEST_CASE("smearing preserves normalization and orthogonality") {
  for (double eta : {1.0, 0.85, 0.6}) {
    for (int n : {0, 2, 5}) {
      const double mass = simpson(-12.0, 12.0, 4801, [&](double x) {
        return smeared_fock_product(n, n, x, eta);
      });
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    }
    const double cross = simpson(-12.0, 12.0, 4801, [&](double x) {
      return smeared_fock_product(1, 3, x, eta);
    });
    CHECK(cross == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("smeared product reduces to a plain product at full efficiency") {
  for (int n : {0, 3, 11}) {
    for (double x : {-0.4, 1.9}) {
      CHECK(smeared_fock_product(n, n, x, 1.0) ==
            doctest::Approx(std::pow(fock_wavefunction(n, x), 2))
                .epsilon(1e-13));
    }
  }
}

TEST_CASE("product table matches the scalar entry point") {
  const SmearedProductTable table(9, 0.82);
  Eigen::MatrixXd full;
  Eigen::VectorXd diag;
  for (double x : {-2.2, 0.1, 1.3}) {
    table.evaluate(x, full);
    table.evaluate_diagonal(x, diag);
    REQUIRE(full.rows() == 10);
    REQUIRE(diag.size() == 10);
    for (int n = 0; n <= 9; ++n) {
      CHECK(diag[n] == doctest::Approx(full(n, n)).epsilon(1e-15));
      for (int m = 0; m <= 9; ++m) {
        CHECK(full(n, m) ==
              doctest::Approx(smeared_fock_product(n, m, x, 0.82))
                  .epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("quadrature pdf of Gaussian states is Gaussian") {
  const double pi = std::acos(-1.0);
  SUBCASE("coherent state, lossy detector") {
    const auto state = StateModel::coherent({1.0, 0.0});
    const DetectorModel detector(0.85);
    const double phi = 0.7;
    const double mean = std::cos(phi);
    const double var = 0.25 + detector.noise_variance();
    for (double x : {-1.0, 0.2, 0.8, 1.6, 2.5}) {
      const double expected = std::exp(-(x - mean) * (x - mean) / (2.0 * var)) /
                              std::sqrt(2.0 * pi * var);
      CHECK(quadrature_pdf(state, phi, x, detector) ==
            doctest::Approx(expected).epsilon(1e-7));
    }
  }
  SUBCASE("thermal state") {
    const auto state = StateModel::thermal(0.5);
    const DetectorModel detector(1.0);
    const double var = 0.25 * (2.0 * 0.5 + 1.0);
    for (double x : {-1.3, 0.0, 0.9}) {
      const double expected = std::exp(-x * x / (2.0 * var)) /
                              std::sqrt(2.0 * pi * var);
      CHECK(quadrature_pdf(state, 0.3, x, detector) ==
            doctest::Approx(expected).epsilon(1e-7));
    }
  }
  SUBCASE("vacuum normalization") {
    const auto state = StateModel::vacuum();
    const DetectorModel detector(0.7);
    const double mass = simpson(-8.0, 8.0, 3201, [&](double x) {
      return quadrature_pdf(state, 0.0, x, detector);
    });
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("fock pdf is phase independent and matches the smeared square") {
  const auto state = StateModel::fock(3);
  const DetectorModel detector(0.9);
  CHECK(state.phase_independent());
  for (double x : {-1.1, 0.4, 2.0}) {
    const double p0 = quadrature_pdf(state, 0.0, x, detector);
    CHECK(quadrature_pdf(state, 1.9, x, detector) ==
          doctest::Approx(p0).epsilon(1e-12));
    CHECK(p0 == doctest::Approx(smeared_fock_product(3, 3, x, 0.9))
                    .epsilon(1e-12));
  }
}

TEST_CASE("sampling is a pure function of state, detector and seed") {
  const auto state = StateModel::coherent({0.8, -0.3});
  const DetectorModel detector(0.85);
  const auto a = sample_quadratures(state, detector, 2000, 7);
  const auto b = sample_quadratures(state, detector, 2000, 7);
  const auto c = sample_quadratures(state, detector, 2000, 7, 4);
  REQUIRE(a.size() == 2000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].phi == b[i].phi);
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].phi == c[i].phi);  // jobs must never change values
    CHECK(a[i].x == c[i].x);
  }
  const auto d = sample_quadratures(state, detector, 2000, 8);
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i].x == d[i].x;
  CHECK(same < 10);
}

TEST_CASE("sample phases cover [0, pi) uniformly") {
  const auto state = StateModel::vacuum();
  const DetectorModel detector(1.0);
  const auto samples = sample_quadratures(state, detector, 20000, 3);
  const double pi = std::acos(-1.0);
  double mean = 0.0;
  for (const auto& s : samples) {
    REQUIRE(s.phi >= 0.0);
    REQUIRE(s.phi < pi);
    mean += s.phi;
  }
  mean /= static_cast<double>(samples.size());
  // uniform mean pi/2, sd of the mean = pi/sqrt(12 N)
  CHECK(std::abs(mean - pi / 2.0) < 5.0 * pi / std::sqrt(12.0 * 20000.0));
}

TEST_CASE("sample moments match the state") {
  SUBCASE("vacuum at unit efficiency") {
    const auto samples = sample_quadratures(StateModel::vacuum(),
                                            DetectorModel(1.0), 50000, 11);
    double m2 = 0.0;
    for (const auto& s : samples) m2 += s.x * s.x;
    m2 /= static_cast<double>(samples.size());
    // var(x^2) = 2 var^2 for a Gaussian
    CHECK(std::abs(m2 - 0.25) <
          5.0 * 0.25 * std::sqrt(2.0 / 50000.0));
  }
  SUBCASE("lossy detector widens the distribution") {
    const DetectorModel detector(0.6);
    const auto samples = sample_quadratures(StateModel::vacuum(), detector,
                                            50000, 12);
    double m2 = 0.0;
    for (const auto& s : samples) m2 += s.x * s.x;
    m2 /= static_cast<double>(samples.size());
    const double var = 0.25 + detector.noise_variance();
    CHECK(std::abs(m2 - var) < 5.0 * var * std::sqrt(2.0 / 50000.0));
  }
  SUBCASE("coherent mean tracks the phase") {
    const auto state = StateModel::coherent({1.0, 0.0});
    const auto samples = sample_at_phase(state, DetectorModel(1.0), 0.9,
                                         50000, 13);
    double mean = 0.0;
    for (const auto& s : samples) {
      REQUIRE(s.phi == 0.9);
      mean += s.x;
    }
    mean /= static_cast<double>(samples.size());
    CHECK(std::abs(mean - std::cos(0.9)) < 5.0 * 0.5 / std::sqrt(50000.0));
  }
}

TEST_CASE("state model expansion and validation") {
  SUBCASE("poisson diagonal of a coherent state") {
    const auto rho = StateModel::coherent({1.0, 0.0}).expand();
    CHECK(rho.elements()(0, 0).real() ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
    CHECK(rho.elements()(2, 2).real() ==
          doctest::Approx(std::exp(-1.0) / 2.0).epsilon(1e-10));
    CHECK(rho.elements()(0, 1).real() ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
    rho.validate();
  }
  SUBCASE("thermal diagonal is geometric") {
    const auto rho = StateModel::thermal(0.5).expand();
    for (int n : {0, 1, 2}) {
      CHECK(rho.elements()(n, n).real() ==
            doctest::Approx((2.0 / 3.0) * std::pow(1.0 / 3.0, n))
                .epsilon(1e-10));
    }
  }
  SUBCASE("invalid inputs throw typed errors") {
    CHECK_THROWS_AS(StateModel::fock(-1), IndexError);
    CHECK_THROWS_AS(StateModel::fock(5, 4), TruncationError);
    CHECK_THROWS_AS(StateModel::thermal(-0.1), DomainError);
    CHECK_THROWS_AS(StateModel::coherent({3.0, 0.0}, 4), TruncationError);
    CHECK_THROWS_AS(DetectorModel(0.0), DomainError);
    CHECK_THROWS_AS(DetectorModel(1.0001), DomainError);
    CHECK_THROWS_AS(SmearedProductTable(3, 0.0), DomainError);
    CHECK_THROWS_AS(smeared_fock_product(-1, 0, 0.0, 0.9), IndexError);
  }
  SUBCASE("density matrix checks") {
    Eigen::MatrixXcd bad = Eigen::MatrixXcd::Zero(2, 2);
    bad(0, 0) = 1.5;
    bad(1, 1) = -0.5;
    CHECK_THROWS_AS(FockDensityMatrix(bad).validate(), ValidationError);
    Eigen::MatrixXcd skew = Eigen::MatrixXcd::Zero(2, 2);
    skew(0, 0) = 0.5;
    skew(1, 1) = 0.5;
    skew(0, 1) = {0.0, 0.3};
    skew(1, 0) = {0.0, 0.3};  // equal, not conjugate: not Hermitian
    CHECK_THROWS_AS(FockDensityMatrix(skew).validate(), ValidationError);
  }
}
