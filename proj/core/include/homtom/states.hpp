#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace homtom {

// One balanced-homodyne event: local oscillator phase and scaled quadrature
// outcome.  Conventions: X_phi = (a^dag e^{i phi} + a e^{-i phi})/2, so the
// vacuum has variance 1/4; phases live in [0, pi).
struct QuadratureSample {
  double phi;
  double x;
};

// Quantum efficiency eta of the detection chain.  In the rescaled-quadrature
// picture an efficiency eta < 1 acts as additive Gaussian noise of variance
// (1 - eta)/(4 eta) on top of the ideal outcome.
class DetectorModel {
 public:
  explicit DetectorModel(double eta);
  double eta() const { return eta_; }
  double noise_variance() const { return (1.0 - eta_) / (4.0 * eta_); }

 private:
  double eta_;
};

// Density matrix in the Fock basis.  Kept exactly Hermitian; validation
// checks trace and approximate positivity.
class FockDensityMatrix {
 public:
  explicit FockDensityMatrix(Eigen::MatrixXcd elements);
  const Eigen::MatrixXcd& elements() const { return rho_; }
  int dim() const { return static_cast<int>(rho_.rows()); }
  void validate(double trace_tol = 1e-8, double negativity_tol = 1e-8) const;

 private:
  Eigen::MatrixXcd rho_;
};

// Source description used by the simulator: a named family or an explicit
// density matrix, with a Fock-space cutoff.
class StateModel {
 public:
  static StateModel vacuum();
  static StateModel fock(int n, int truncation = 0);
  static StateModel coherent(std::complex<double> alpha, int truncation = 0);
  static StateModel thermal(double nbar, int truncation = 0);
  static StateModel density_matrix(FockDensityMatrix rho);

  // Expand to a Fock-basis density matrix.  Throws TruncationError when the
  // cutoff discards more than 1e-8 of the state weight.
  FockDensityMatrix expand() const;
  int truncation() const { return truncation_; }
  bool phase_independent() const;

 private:
  enum class Kind { kFock, kCoherent, kThermal, kMatrix };
  StateModel(Kind kind, int truncation) : kind_(kind), truncation_(truncation) {}

  Kind kind_;
  int truncation_ = 0;
  int fock_n_ = 0;
  std::complex<double> alpha_{0.0, 0.0};
  double nbar_ = 0.0;
  std::vector<std::complex<double>> matrix_;  // row-major when kind == kMatrix
};

// Harmonic oscillator eigenfunction psi_n(x) in the vacuum-variance-1/4
// convention, psi_n(x) = 2^{1/4} h_n(sqrt(2) x) with h_n the orthonormal
// Hermite functions.
double fock_wavefunction(int n, double x);

// All of psi_0(x) .. psi_nmax(x) by upward recurrence.
std::vector<double> fock_wavefunctions(int nmax, double x);

// Gaussian-smeared wavefunction products
//   q_nm(x) = (G_delta * psi_n psi_m)(x),  delta^2 = (1-eta)/(4 eta),
// so that the noisy quadrature density is p(x,phi) =
// sum_nm rho_nm e^{i(m-n)phi} q_nm(x).  At eta = 1 these reduce to plain
// products psi_n(x) psi_m(x).  The expansion coefficients depend only on
// (n, m, eta), so tables for a fixed detector are precomputed once.
class SmearedProductTable {
 public:
  SmearedProductTable(int nmax, double eta);
  int nmax() const { return nmax_; }
  double eta() const { return eta_; }

  // full symmetric table out(n, m) = q_nm(x); out resized to (nmax+1)^2
  void evaluate(double x, Eigen::MatrixXd& out) const;
  // diagonal only: out[m] = q_mm(x)
  void evaluate_diagonal(double x, Eigen::VectorXd& out) const;

 private:
  int nmax_;
  double eta_;
  double inv_s_;  // 1/sqrt(1 + 4 delta^2)
  double pref_;   // sqrt(2)/(pi^{1/4} s)
  // coeff_[pair(n,m)][k] multiplies h_{n+m-2k}(sqrt(2) x / s); extended
  // precision because the alternating h sum cancels, losing roughly a
  // digit per six orders of n + m
  std::vector<std::vector<long double>> coeff_;
};

double smeared_fock_product(int n, int m, double x, double eta);

// Probability density of a homodyne outcome at fixed phase.
double quadrature_pdf(const StateModel& state, double phi, double x,
                      const DetectorModel& detector);

// Draw N samples with phases uniform on [0, pi).  Counter-based RNG makes
// the result a pure function of (state, detector, seed); the jobs parameter
// only changes wall time, never values.
std::vector<QuadratureSample> sample_quadratures(const StateModel& state,
                                                 const DetectorModel& detector,
                                                 std::size_t count,
                                                 std::uint64_t seed,
                                                 unsigned jobs = 1);

// Same but with every sample taken at one fixed phase.
std::vector<QuadratureSample> sample_at_phase(const StateModel& state,
                                              const DetectorModel& detector,
                                              double phi, std::size_t count,
                                              std::uint64_t seed,
                                              unsigned jobs = 1);

}  // namespace homtom
