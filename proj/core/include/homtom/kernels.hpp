#pragma once

#include <Eigen/Dense>
#include <complex>

#include "homtom/special.hpp"

namespace homtom {

// Pattern function K_nm(x, phi; eta): averaging K_nm over measured
// quadrature data gives an unbiased estimate of rho_nm, with the detector
// inefficiency eta deconvolved analytically.  Only eta > 1/2 is admissible;
// at and below that threshold the deconvolution diverges and
// EfficiencyTooLow is thrown.
//
// Evaluation is routed by problem size: a closed form in scaled parabolic
// cylinder values for n + m <= 28 (loses digits beyond through cancellation
// in its alternating sum), and an oscillatory quadrature of the equivalent
// Laguerre-transform representation for larger indices.
std::complex<double> kernel_fock(int n, int m, double x, double phi,
                                 double eta);

// Independent slow-path evaluation of Tr[op Kmat(x, phi; eta)] through the
// eigendecomposition of the truncated quadrature operator and an adaptive
// integral over the conjugate variable.  Exists to cross-check kernel_fock;
// accurate to ~1e-7 for operators supported on dimensions <= 10.
std::complex<double> kernel_oracle(const Eigen::MatrixXcd& op, double x,
                                   double phi, double eta);

// All kernels of a dim x dim reconstruction evaluated together at one
// sample point, sharing the parabolic-cylinder array (and, for large
// dimensions, quadrature nodes) across elements.
class KernelBank {
 public:
  KernelBank(int dim, double eta);
  int dim() const { return dim_; }
  double eta() const { return eta_; }

  // out(n, m) = K_nm(x, phi); resized to dim x dim, Hermitian in (n, m)
  void evaluate(double x, double phi, Eigen::MatrixXcd& out) const;

  // out[m] = K_mm(x), the phase-independent diagonal
  void evaluate_diagonal(double x, Eigen::VectorXd& out) const;

 private:
  struct PairCoeff {
    int n, m;
    bool use_imag;                  // pick Re or Im of the cylinder value
    std::vector<double> c;          // signed k-sum coefficients
  };

  int dim_;
  double eta_;
  double kappa_, kappa2_;
  int dt_order_;                    // cylinder array length for closed pairs
  std::vector<PairCoeff> closed_;   // pairs with n + m <= 28
  std::vector<std::pair<int, int>> quad_;  // pairs beyond the closed range
};

}  // namespace homtom
