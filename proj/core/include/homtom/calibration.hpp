#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace homtom {

// diagonal POVM element <m|Pi_n|m> of a photodetector with efficiency eta
// and dark-count mean nbar, summed to 1e-14 relative accuracy.  The outcome
// series diverges when (1 - eta) * nbar >= 1.
double theoretical_povm(double eta, double nbar, int n, int m);

// rows n = 0..n_max, columns m = 0..dim-1
Eigen::MatrixXd theoretical_povm_table(double eta, double nbar, int n_max,
                                       int dim);

// bipartite density matrix on A (\otimes) B in the product basis
// |i>_A |j>_B at joint index i * dim_b + j
struct BipartiteState {
  int dim_a = 0;
  int dim_b = 0;
  Eigen::MatrixXcd r;

  // validates Hermiticity, positivity and unit trace
  BipartiteState(int dim_a, int dim_b, Eigen::MatrixXcd matrix);

  // |TB> with coefficients proportional to xi^m on |m>|m>, normalized
  // within the truncation
  static BipartiteState twin_beam(std::complex<double> xi, int truncation);
  static BipartiteState maximally_entangled(int dim);
  static BipartiteState product_vacuum(int dim_a, int dim_b);
};

// matrix of the linear map vec(Pi) -> vec(sigma) where sigma is the
// unnormalized state of B conditioned on outcome Pi at A:
// sigma_il = sum_{jk} R[(j,i),(k,l)] Pi_kj.  Rows index (i * dim_b + l),
// columns (k * dim_a + j).
Eigen::MatrixXcd conditional_map_matrix(const BipartiteState& state);

// unnormalized conditional state of B and the outcome probability (its
// trace); divide by the probability for the normalized state
std::pair<Eigen::MatrixXcd, double> conditional_state(
    const BipartiteState& state, const Eigen::MatrixXcd& pi);

struct FaithfulnessReport {
  bool faithful = false;
  // largest over smallest relevant singular value of the conditional map;
  // infinite when the map cannot be inverted at all
  double condition_number = 0.0;
};

// a state is faithful when the conditional map is injective, so detector
// elements can be recovered from conditioned states of the other arm
FaithfulnessReport faithfulness_check(const BipartiteState& state);

// least-squares inversion of the conditional map; requires a faithful state
Eigen::MatrixXcd povm_from_conditionals(const BipartiteState& state,
                                        const Eigen::MatrixXcd& sigma);

struct JointRecord {
  int n = 0;      // photocounter outcome at A
  double phi = 0.0;  // homodyne phase at B
  double x = 0.0;    // homodyne quadrature at B
};

// Monte-Carlo calibration data: twin-beam source with parameter xi, a
// photodetector (eta, nbar) on arm A and an efficiency eta_h homodyne on
// arm B with uniform phase on [0, pi).  truncation 0 picks the smallest
// Fock cutoff holding 0.999 of the twin-beam mass; an explicit cutoff
// below that mass raises TruncationError.
std::vector<JointRecord> simulate_joint(std::complex<double> xi, double eta,
                                        double nbar, double eta_h,
                                        std::size_t count, std::uint64_t seed,
                                        int truncation = 0, unsigned jobs = 1);

struct DiagonalPOVM {
  int n_max = 0;
  int dim = 0;
  Eigen::MatrixXd p;    // rows n = 0..n_max, columns m = 0..dim-1
  Eigen::MatrixXd err;  // matching error bars (zeros when not estimated)
  std::string method;
  // pooled rows for outcomes above n_max (maximum-likelihood path only)
  std::optional<Eigen::VectorXd> overflow;
  std::optional<Eigen::VectorXd> overflow_err;
};

// inverse-map estimate: per-outcome diagonal tomography of the conditioned
// homodyne records divided by the twin-beam weights, with outcome
// frequencies carrying Wilson-score errors
DiagonalPOVM calibrate_averaging(std::span<const JointRecord> records,
                                 std::complex<double> xi, double eta_h,
                                 int n_max, int dim, unsigned jobs = 1);

struct CalibrationMlConfig {
  std::size_t max_iters = 100000;
  double tol = 1e-8;  // relative log-likelihood change, 5 successive
  // bootstrap resample count for error bars; 0 disables, otherwise >= 20
  std::size_t bootstrap = 50;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  // optional starting table with n_max + 2 rows (overflow row last);
  // columns are normalized on input
  Eigen::MatrixXd initial;
};

struct CalibrationMlResult {
  DiagonalPOVM povm;
  std::size_t iterations = 0;
  double loglik = 0.0;
  bool converged = false;
  // log-likelihood at the start of every iteration, non-decreasing
  std::vector<double> loglik_trace;
};

// maximum-likelihood estimate over column-stochastic tables (outcomes above
// n_max pooled into an overflow row) by expectation-maximization with
// per-column renormalization; homodyne noise stays in the forward model, so
// any eta_h in (0, 1] is allowed.  The likelihood internally models Fock
// columns past dim until the twin-beam tail mass drops below 1e-5 (records
// fed by an unmodeled column would bias the reported ones) and discards
// them on return.
CalibrationMlResult calibrate_ml(std::span<const JointRecord> records,
                                 std::complex<double> xi, double eta_h,
                                 int n_max, int dim,
                                 const CalibrationMlConfig& config = {});

}  // namespace homtom
