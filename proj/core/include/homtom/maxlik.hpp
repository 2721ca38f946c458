#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "homtom/averaging.hpp"
#include "homtom/states.hpp"

namespace homtom {

// upper triangular matrix T with nonnegative real diagonal; rho(T) =
// T^dag T / Tr[T^dag T] is Hermitian, positive semidefinite and unit trace
// for any entries, which turns the constrained likelihood maximization into
// an unconstrained search over d^2 real parameters
struct CholeskyFactor {
  Eigen::MatrixXcd t;

  static CholeskyFactor identity(int dim);
  static CholeskyFactor random(int dim, std::uint64_t seed);
  // factor an existing density matrix (eigenvalues clipped to a small
  // positive floor so the factor has full rank)
  static CholeskyFactor from_density(const Eigen::MatrixXcd& rho);

  Eigen::MatrixXcd density() const;
};

enum class MlOptimizer {
  expectation_maximization,
  downhill_simplex,
  projected_gradient,
};

struct MlConfig {
  // 0 picks the smallest truncation whose estimated diagonal mass reaches
  // 0.999 in a plain-averaging pre-pass (requires eta > 0.5)
  int dim = 0;
  double eta = 1.0;
  MlOptimizer optimizer = MlOptimizer::expectation_maximization;
  std::size_t max_iters = 5000;
  double tol = 1e-8;  // relative log-likelihood change
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  // extrapolate through pairs of multiplicative updates (EM backend only)
  bool accelerate = true;
  // optional starting density matrix; empty starts from the maximally
  // mixed state
  Eigen::MatrixXcd initial;
};

struct MlReport {
  std::size_t iterations = 0;
  double loglik = 0.0;
  // max over eigendirections of rho-hat with eigenvalue > 1e-7 of
  // |<psi| (1/N) sum_i Pi_i / p_i |psi> - 1|, zero at an exact interior
  // maximum of the likelihood
  double stationarity_residual = 0.0;
  bool converged = false;
  int truncation = 0;
  // log-likelihood after every accepted update, non-decreasing
  std::vector<double> loglik_trace;
};

struct MlResult {
  DensityMatrixEstimate estimate;
  MlReport report;
};

// total log-likelihood sum_i log p_eta(x_i, phi_i; rho(T)); densities are
// clamped at 1e-300 before the log.  Valid for any eta in (0, 1]: the
// efficiency enters the forward model only, so no eta > 1/2 bound applies.
double log_likelihood(const CholeskyFactor& factor,
                      std::span<const QuadratureSample> samples, double eta);

MlResult ml_reconstruct(std::span<const QuadratureSample> samples,
                        const MlConfig& config);

// Fisher information of a parametric family pdf(gamma, x) at gamma,
// integral of (d_gamma p)^2 / p over the grid by trapezoidal quadrature
// with a central difference in gamma
double fisher_information(
    const std::function<double(double, double)>& pdf_family, double gamma,
    std::span<const double> grid);

struct MlBootstrapResult {
  // per-element sqrt(var(Re) + var(Im)) over the converged resample fits
  Eigen::MatrixXd std_err;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

// refits resamples drawn with replacement, warm-started from the full fit
MlBootstrapResult ml_bootstrap(std::span<const QuadratureSample> samples,
                               const MlConfig& config, std::size_t resamples,
                               std::uint64_t seed);

}  // namespace homtom
