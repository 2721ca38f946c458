#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "homtom/errors.hpp"
#include "homtom/maxlik.hpp"
#include "homtom/states.hpp"

using namespace homtom;
using std::complex;

namespace {

bool is_density_matrix(const Eigen::MatrixXcd& rho, double tol = 1e-10) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(rho.trace().real() - 1.0) > tol) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
  return es.eigenvalues().minCoeff() > -tol;
}

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a - b);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// per-sample pieces of the qubit density p(x, phi) =
// a q00 + (1-a) q11 + 2 (c cos phi - d sin phi) q01
struct QubitTerms {
  std::vector<double> q00, q11, q01, c, s;
};

QubitTerms qubit_terms(std::span<const QuadratureSample> samples, double eta) {
  const SmearedProductTable table(1, eta);
  QubitTerms t;
  Eigen::MatrixXd q;
  for (const auto& sample : samples) {
    table.evaluate(sample.x, q);
    t.q00.push_back(q(0, 0));
    t.q11.push_back(q(1, 1));
    t.q01.push_back(q(0, 1));
    t.c.push_back(std::cos(sample.phi));
    t.s.push_back(std::sin(sample.phi));
  }
  return t;
}

double qubit_loglik(const QubitTerms& t, double a, double c, double d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.q00.size(); ++i) {
    const double p = a * t.q00[i] + (1.0 - a) * t.q11[i] +
                     2.0 * (c * t.c[i] - d * t.s[i]) * t.q01[i];
    acc += std::log(std::max(p, 1e-300));
  }
  return acc;
}

}  // namespace

TEST_CASE("cholesky factor parametrization stays on the density manifold") {
  CHECK(CholeskyFactor::identity(3).density().isApprox(
      Eigen::MatrixXcd::Identity(3, 3) / 3.0, 1e-14));

  const auto random = CholeskyFactor::random(4, 17);
  CHECK(is_density_matrix(random.density()));
  CHECK(random.density().isApprox(CholeskyFactor::random(4, 17).density(),
                                  1e-15));
  CHECK(!random.density().isApprox(CholeskyFactor::random(4, 18).density(),
                                   1e-6));

  Eigen::MatrixXcd rho(3, 3);
  rho << complex<double>(0.5, 0.0), complex<double>(0.1, 0.05),
      complex<double>(0.0, 0.0), complex<double>(0.1, -0.05),
      complex<double>(0.3, 0.0), complex<double>(0.02, -0.01),
      complex<double>(0.0, 0.0), complex<double>(0.02, 0.01),
      complex<double>(0.2, 0.0);
  const auto factored = CholeskyFactor::from_density(rho);
  CHECK((factored.density() - rho).cwiseAbs().maxCoeff() <= 1e-10);

  CHECK_THROWS_AS(CholeskyFactor::identity(0), DomainError);
  CHECK_THROWS_AS(CholeskyFactor::random(-1, 0), DomainError);
  CHECK_THROWS_AS(CholeskyFactor::from_density(Eigen::MatrixXcd::Zero(2, 3)),
                  DomainError);
  CholeskyFactor zero{Eigen::MatrixXcd::Zero(2, 2)};
  CHECK_THROWS_AS(zero.density(), DomainError);
}

TEST_CASE("log-likelihood matches a direct density assembly") {
  const auto samples = sample_quadratures(StateModel::coherent({0.7, 0.1}, 10),
                                          DetectorModel(0.9), 200, 41);
  const auto factor = CholeskyFactor::random(3, 5);
  const Eigen::MatrixXcd rho = factor.density();

  const SmearedProductTable table(2, 0.9);
  Eigen::MatrixXd q;
  double expected = 0.0;
  for (const auto& s : samples) {
    table.evaluate(s.x, q);
    complex<double> p = 0.0;
    for (int n = 0; n < 3; ++n) {
      for (int m = 0; m < 3; ++m) {
        p += rho(n, m) * std::polar(1.0, (m - n) * s.phi) * q(n, m);
      }
    }
    expected += std::log(std::max(p.real(), 1e-300));
  }

  const double got = log_likelihood(factor, samples, 0.9);
  CHECK(got == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("qubit fit agrees with an exhaustive grid search") {
  Eigen::MatrixXcd truth(2, 2);
  truth << complex<double>(0.7, 0.0), complex<double>(0.25, -0.1),
      complex<double>(0.25, 0.1), complex<double>(0.3, 0.0);
  const auto samples =
      sample_quadratures(StateModel::density_matrix(FockDensityMatrix(truth)),
                         DetectorModel(0.85), 12000, 99);

  const auto terms = qubit_terms(samples, 0.85);
  double best_a = 0.5, best_c = 0.0, best_d = 0.0;
  double best = qubit_loglik(terms, best_a, best_c, best_d);
  double half = 0.5;
  for (int level = 0; level < 4; ++level) {
    const double lo_a = std::max(0.0, best_a - half);
    const double hi_a = std::min(1.0, best_a + half);
    const double step = half / 10.0;
    double next_a = best_a, next_c = best_c, next_d = best_d;
    for (double a = lo_a; a <= hi_a + 1e-12; a += step) {
      for (double c = best_c - half; c <= best_c + half + 1e-12; c += step) {
        for (double d = best_d - half; d <= best_d + half + 1e-12; d += step) {
          if (c * c + d * d > a * (1.0 - a)) continue;
          const double l = qubit_loglik(terms, a, c, d);
          if (l > best) {
            best = l;
            next_a = a;
            next_c = c;
            next_d = d;
          }
        }
      }
    }
    best_a = next_a;
    best_c = next_c;
    best_d = next_d;
    half /= 5.0;
  }
  Eigen::MatrixXcd grid_opt(2, 2);
  grid_opt << complex<double>(best_a, 0.0), complex<double>(best_c, best_d),
      complex<double>(best_c, -best_d), complex<double>(1.0 - best_a, 0.0);

  MlConfig config;
  config.dim = 2;
  config.eta = 0.85;
  const auto result = ml_reconstruct(samples, config);
  REQUIRE(result.report.converged);
  CHECK(is_density_matrix(result.estimate.rho));
  CHECK(trace_distance(result.estimate.rho, grid_opt) <= 1.5e-3);
  // the iterative fit must reach at least the best grid node
  CHECK(result.report.loglik >= best - 1e-3);
  CHECK(log_likelihood(CholeskyFactor::from_density(result.estimate.rho),
                       samples, 0.85) ==
        doctest::Approx(result.report.loglik).epsilon(1e-8));
  // and both land near the sampled state
  CHECK(trace_distance(result.estimate.rho, truth) <= 0.05);
}

TEST_CASE("vacuum fit is clean and the likelihood ascent is monotone") {
  const auto samples = sample_quadratures(StateModel::vacuum(),
                                          DetectorModel(1.0), 20000, 7);
  MlConfig config;
  config.dim = 4;
  const auto result = ml_reconstruct(samples, config);
  REQUIRE(result.report.converged);
  CHECK(result.report.truncation == 4);
  CHECK(result.estimate.sample_count == samples.size());
  CHECK(is_density_matrix(result.estimate.rho));
  CHECK(result.estimate.rho(0, 0).real() > 0.98);

  const auto& trace = result.report.loglik_trace;
  REQUIRE(!trace.empty());
  CHECK(trace.back() == result.report.loglik);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1]);
  }
  CHECK(result.report.stationarity_residual <= 10.0 * config.tol);
}

TEST_CASE("automatic truncation captures the state mass") {
  const auto samples = sample_quadratures(StateModel::coherent({1.0, 0.0}),
                                          DetectorModel(0.8), 30000, 3);
  MlConfig config;
  config.eta = 0.8;  // dim = 0 picks the cutoff from the data
  const auto result = ml_reconstruct(samples, config);
  CHECK(result.report.truncation >= 5);
  CHECK(result.report.truncation <= 8);
  CHECK(result.estimate.rho.rows() == result.report.truncation);
  CHECK(std::abs(result.estimate.rho(0, 0).real() - std::exp(-1.0)) < 0.05);
}

TEST_CASE("likelihood fits work below the deconvolution efficiency bound") {
  // pattern-function averaging needs eta > 1/2; the forward model does not
  const auto samples = sample_quadratures(StateModel::coherent({0.6, 0.0}, 10),
                                          DetectorModel(0.45), 20000, 21);
  MlConfig config;
  config.dim = 4;
  config.eta = 0.45;
  config.max_iters = 30000;
  const auto result = ml_reconstruct(samples, config);
  CHECK(is_density_matrix(result.estimate.rho));
  CHECK(std::abs(result.estimate.rho(0, 0).real() - std::exp(-0.36)) < 0.2);
}

TEST_CASE("optimizer backends agree on a small problem") {
  Eigen::MatrixXcd truth(2, 2);
  truth << complex<double>(0.6, 0.0), complex<double>(0.2, 0.0),
      complex<double>(0.2, 0.0), complex<double>(0.4, 0.0);
  const auto samples =
      sample_quadratures(StateModel::density_matrix(FockDensityMatrix(truth)),
                         DetectorModel(1.0), 3000, 15);
  MlConfig config;
  config.dim = 2;

  config.optimizer = MlOptimizer::expectation_maximization;
  const auto em = ml_reconstruct(samples, config);
  REQUIRE(em.report.converged);

  config.optimizer = MlOptimizer::projected_gradient;
  const auto grad = ml_reconstruct(samples, config);
  CHECK(trace_distance(em.estimate.rho, grad.estimate.rho) <= 0.02);
  CHECK(std::abs(em.report.loglik - grad.report.loglik) <= 0.5);

  config.optimizer = MlOptimizer::downhill_simplex;
  config.max_iters = 20000;
  const auto simplex = ml_reconstruct(samples, config);
  CHECK(trace_distance(em.estimate.rho, simplex.estimate.rho) <= 0.02);
  CHECK(em.report.loglik >= simplex.report.loglik - 0.5);
}

TEST_CASE("random restarts land on the same maximum") {
  const auto samples = sample_quadratures(StateModel::coherent({0.5, 0.3}, 8),
                                          DetectorModel(0.9), 5000, 33);
  MlConfig config;
  config.dim = 4;
  config.eta = 0.9;
  const auto base = ml_reconstruct(samples, config);
  REQUIRE(base.report.converged);
  for (std::uint64_t seed : {1ull, 2ull}) {
    MlConfig restart = config;
    restart.initial = CholeskyFactor::random(4, seed).density();
    const auto other = ml_reconstruct(samples, restart);
    REQUIRE(other.report.converged);
    CHECK(std::abs(other.report.loglik - base.report.loglik) <=
          1e-6 * std::abs(base.report.loglik));
    CHECK(trace_distance(other.estimate.rho, base.estimate.rho) <= 5e-3);
  }
}

TEST_CASE("fits are independent of the worker count") {
  const auto samples = sample_quadratures(StateModel::coherent({0.8, 0.0}, 10),
                                          DetectorModel(0.9), 4000, 57);
  MlConfig config;
  config.dim = 3;
  config.eta = 0.9;
  const auto one = ml_reconstruct(samples, config);
  config.jobs = 4;
  const auto four = ml_reconstruct(samples, config);
  CHECK((one.estimate.rho - four.estimate.rho).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(one.report.iterations == four.report.iterations);
  CHECK(one.report.loglik == doctest::Approx(four.report.loglik).epsilon(1e-14));
}

TEST_CASE("fisher information of a shifted Gaussian family") {
  // N(gamma, 1/4) has information 1/sigma^2 = 4 regardless of gamma
  const auto family = [](double gamma, double x) {
    const double d = x - gamma;
    return std::exp(-2.0 * d * d) * std::sqrt(2.0 / std::acos(-1.0));
  };
  std::vector<double> grid;
  for (int i = 0; i <= 1200; ++i) grid.push_back(-6.0 + 0.01 * i);
  CHECK(fisher_information(family, 0.3, grid) ==
        doctest::Approx(4.0).epsilon(1e-3));

  const auto unit = [](double gamma, double x) {
    const double d = x - gamma;
    return std::exp(-0.5 * d * d) / std::sqrt(2.0 * std::acos(-1.0));
  };
  CHECK(fisher_information(unit, 0.0, grid) ==
        doctest::Approx(1.0).epsilon(1e-3));

  CHECK_THROWS_AS(fisher_information(nullptr, 0.0, grid), DomainError);
  const std::vector<double> two{0.0, 1.0};
  CHECK_THROWS_AS(fisher_information(unit, 0.0, two), DomainError);
  const std::vector<double> unsorted{0.0, 1.0, 0.5};
  CHECK_THROWS_AS(fisher_information(unit, 0.0, unsorted), DomainError);
}

TEST_CASE("bootstrap refits give element-wise error bars") {
  const auto samples = sample_quadratures(StateModel::coherent({0.6, 0.0}, 8),
                                          DetectorModel(0.9), 4000, 71);
  MlConfig config;
  config.dim = 3;
  config.eta = 0.9;
  const auto boot = ml_bootstrap(samples, config, 24, 11);
  CHECK(boot.used + boot.excluded == 24);
  CHECK(boot.used >= 20);
  REQUIRE(boot.std_err.rows() == 3);
  REQUIRE(boot.std_err.cols() == 3);
  for (int n = 0; n < 3; ++n) {
    for (int m = 0; m < 3; ++m) {
      CHECK(std::isfinite(boot.std_err(n, m)));
      CHECK(boot.std_err(n, m) >= 0.0);
      CHECK(boot.std_err(n, m) <= 0.2);
    }
  }
  // error bars should shrink roughly like 1/sqrt(N); just require nonzero
  CHECK(boot.std_err(0, 0) > 1e-5);

  CHECK_THROWS_AS(ml_bootstrap(samples, config, 19, 1), DomainError);
}

TEST_CASE("likelihood input validation") {
  const auto samples = sample_quadratures(StateModel::vacuum(),
                                          DetectorModel(1.0), 200, 1);
  const std::vector<QuadratureSample> empty;
  const auto factor = CholeskyFactor::identity(2);
  CHECK_THROWS_AS(log_likelihood(factor, empty, 1.0), InsufficientData);
  CHECK_THROWS_AS(log_likelihood(factor, samples, 0.0), DomainError);
  CHECK_THROWS_AS(log_likelihood(factor, samples, 1.2), DomainError);

  MlConfig config;
  config.dim = 2;
  config.eta = 1.5;
  CHECK_THROWS_AS(ml_reconstruct(samples, config), DomainError);
  config.eta = 1.0;
  config.tol = 0.0;
  CHECK_THROWS_AS(ml_reconstruct(samples, config), DomainError);
  config.tol = 1e-8;
  config.max_iters = 0;
  CHECK_THROWS_AS(ml_reconstruct(samples, config), DomainError);
  config.max_iters = 100;
  config.dim = -1;
  CHECK_THROWS_AS(ml_reconstruct(samples, config), DomainError);
  config.dim = 0;
  config.eta = 0.45;  // automatic truncation needs the averaging pre-pass
  CHECK_THROWS_AS(ml_reconstruct(samples, config), DomainError);
  config.dim = 20;
  config.eta = 1.0;
  CHECK_THROWS_AS(ml_reconstruct(samples, config), InsufficientData);
  CHECK_THROWS_AS(ml_reconstruct(empty, config), InsufficientData);

  config.dim = 2;
  config.initial = Eigen::MatrixXcd::Identity(3, 3) / 3.0;
  CHECK_THROWS_AS(ml_reconstruct(samples, config), DomainError);
  config.initial = -Eigen::MatrixXcd::Identity(2, 2);
  CHECK_THROWS_AS(ml_reconstruct(samples, config), DomainError);
}
