#include "homtom/states.hpp"

#include <cmath>
#include <numbers>

#include "homtom/errors.hpp"

namespace homtom {

DetectorModel::DetectorModel(double eta) : eta_(eta) {
  if (!(eta > 0.0) || eta > 1.0) {
    throw DomainError("DetectorModel: efficiency must lie in (0, 1]");
  }
}

FockDensityMatrix::FockDensityMatrix(Eigen::MatrixXcd elements)
    : rho_(std::move(elements)) {
  if (rho_.rows() != rho_.cols() || rho_.rows() == 0) {
    throw ValidationError("FockDensityMatrix: matrix must be square");
  }
  if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ValidationError("FockDensityMatrix: matrix is not Hermitian");
  }
  rho_ = 0.5 * (rho_ + rho_.adjoint().eval());
}

void FockDensityMatrix::validate(double trace_tol,
                                 double negativity_tol) const {
  const double tr = rho_.trace().real();
  if (std::abs(tr - 1.0) > trace_tol) {
    throw ValidationError("FockDensityMatrix: trace deviates from 1 by " +
                          std::to_string(tr - 1.0));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_,
                                                     Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -negativity_tol) {
    throw ValidationError("FockDensityMatrix: negative eigenvalue " +
                          std::to_string(min_eig));
  }
}

StateModel StateModel::vacuum() { return fock(0); }

StateModel StateModel::fock(int n, int truncation) {
  if (n < 0) throw IndexError("StateModel::fock: negative photon number");
  if (truncation == 0) truncation = n + 1;
  if (truncation <= n) {
    throw TruncationError("StateModel::fock: cutoff excludes the state");
  }
  StateModel s(Kind::kFock, truncation);
  s.fock_n_ = n;
  return s;
}

StateModel StateModel::coherent(std::complex<double> alpha, int truncation) {
  const double a = std::abs(alpha);
  if (truncation == 0) {
    truncation = std::max(20, static_cast<int>(std::ceil(a * a + 6.0 * a + 10.0)));
  }
  StateModel s(Kind::kCoherent, truncation);
  s.alpha_ = alpha;
  return s;
}

StateModel StateModel::thermal(double nbar, int truncation) {
  if (nbar < 0.0) throw DomainError("StateModel::thermal: negative occupation");
  if (truncation == 0) {
    if (nbar < 1e-12) {
      truncation = 1;
    } else {
      // geometric weights: keep mass 1 - 1e-9
      const double ratio = nbar / (1.0 + nbar);
      truncation = static_cast<int>(
          std::ceil(std::log(1e-9) / std::log(ratio))) + 1;
    }
  }
  StateModel s(Kind::kThermal, truncation);
  s.nbar_ = nbar;
  return s;
}

StateModel StateModel::density_matrix(FockDensityMatrix rho) {
  StateModel s(Kind::kMatrix, rho.dim());
  const auto& m = rho.elements();
  s.matrix_.assign(m.data(), m.data() + m.size());
  return s;
}

bool StateModel::phase_independent() const {
  switch (kind_) {
    case Kind::kFock:
    case Kind::kThermal:
      return true;
    case Kind::kCoherent:
      return std::abs(alpha_) == 0.0;
    case Kind::kMatrix: {
      const int d = truncation_;
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          if (a != b && std::abs(matrix_[a * d + b]) > 1e-15) return false;
        }
      }
      return true;
    }
  }
  return false;
}

FockDensityMatrix StateModel::expand() const {
  const int d = truncation_;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
  switch (kind_) {
    case Kind::kFock:
      rho(fock_n_, fock_n_) = 1.0;
      break;
    case Kind::kCoherent: {
      // <n|alpha> = e^{-|a|^2/2} alpha^n / sqrt(n!)
      std::vector<std::complex<double>> amp(d);
      const double lognorm = -0.5 * std::norm(alpha_);
      for (int n = 0; n < d; ++n) {
        if (std::abs(alpha_) == 0.0) {
          amp[n] = n == 0 ? 1.0 : 0.0;
          continue;
        }
        const std::complex<double> phase =
            std::pow(alpha_ / std::abs(alpha_), n);
        const double mag =
            std::exp(lognorm + n * std::log(std::abs(alpha_)) -
                     0.5 * std::lgamma(n + 1.0));
        amp[n] = mag * phase;
      }
      for (int n = 0; n < d; ++n) {
        for (int m = 0; m < d; ++m) {
          rho(n, m) = amp[n] * std::conj(amp[m]);
        }
      }
      break;
    }
    case Kind::kThermal: {
      if (nbar_ < 1e-12) {
        rho(0, 0) = 1.0;
        break;
      }
      const double ratio = nbar_ / (1.0 + nbar_);
      double w = 1.0 / (1.0 + nbar_);
      for (int n = 0; n < d; ++n) {
        rho(n, n) = w;
        w *= ratio;
      }
      break;
    }
    case Kind::kMatrix:
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          rho(a, b) = matrix_[a * d + b];
        }
      }
      break;
  }
  const double tr = rho.trace().real();
  if (tr < 1.0 - 1e-8) {
    throw TruncationError(
        "StateModel::expand: cutoff " + std::to_string(d) +
        " keeps only trace " + std::to_string(tr));
  }
  return FockDensityMatrix(rho / tr);
}

std::vector<double> fock_wavefunctions(int nmax, double x) {
  if (nmax < 0) throw IndexError("fock_wavefunctions: negative index");
  // orthonormal Hermite functions h_j(w) with the Gaussian weight built in,
  // evaluated at w = sqrt(2) x, then scaled by 2^{1/4}
  const double w = std::numbers::sqrt2 * x;
  const double scale = std::pow(2.0, 0.25);
  std::vector<double> psi(nmax + 1);
  double h0 = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * w * w);
  psi[0] = scale * h0;
  if (nmax == 0) return psi;
  double h1 = std::numbers::sqrt2 * w * h0;
  psi[1] = scale * h1;
  for (int j = 1; j < nmax; ++j) {
    const double h2 = std::sqrt(2.0 / (j + 1.0)) * w * h1 -
                      std::sqrt(j / (j + 1.0)) * h0;
    h0 = h1;
    h1 = h2;
    psi[j + 1] = scale * h2;
  }
  return psi;
}

double fock_wavefunction(int n, double x) {
  return fock_wavefunctions(n, x)[static_cast<std::size_t>(n)];
}

SmearedProductTable::SmearedProductTable(int nmax, double eta)
    : nmax_(nmax), eta_(eta) {
  if (nmax < 0) throw IndexError("SmearedProductTable: negative cutoff");
  if (!(eta > 0.0) || eta > 1.0) {
    throw DomainError("SmearedProductTable: efficiency must lie in (0, 1]");
  }
  const double delta2 = (1.0 - eta) / (4.0 * eta);
  const double s = std::sqrt(1.0 + 4.0 * delta2);
  inv_s_ = 1.0 / s;
  pref_ = std::numbers::sqrt2 * std::pow(std::numbers::pi, -0.25) * inv_s_;
  if (eta == 1.0) return;  // evaluation short-circuits to plain products

  // c_k = k! C(n,k) C(m,k) sqrt((n+m-2k)!/(n! m!)) s^{-(n+m-2k)}.  The h
  // orders these multiply alternate in sign, and by n + m ~ 50 the sum
  // cancels ten-odd digits, so both the coefficients and the accumulation
  // run in extended precision: c_0 from lgammal, the rest by an exact
  // rational recurrence.
  const long double s2 = static_cast<long double>(s) * s;
  coeff_.resize(static_cast<std::size_t>(nmax + 1) * (nmax + 2) / 2);
  for (int n = 0; n <= nmax; ++n) {
    for (int m = n; m <= nmax; ++m) {
      auto& c = coeff_[static_cast<std::size_t>(m) * (m + 1) / 2 + n];
      c.resize(n + 1);
      c[0] = std::exp(0.5L * (lgammal(n + m + 1.0L) - lgammal(n + 1.0L) -
                              lgammal(m + 1.0L)) -
                      (n + m) * std::log(static_cast<long double>(s)));
      for (int k = 0; k + 1 <= n; ++k) {
        const long double drop = static_cast<long double>(n + m - 2 * k) *
                                 (n + m - 2 * k - 1);
        c[k + 1] = c[k] * (n - k) * (m - k) * s2 /
                   ((k + 1) * std::sqrt(drop));
      }
    }
  }
}

namespace {

// orthonormal Hermite functions with Gaussian weight, h_0..h_jmax at w,
// in extended precision to match the coefficient tables
void hermite_weighted(int jmax, long double w, std::vector<long double>& h) {
  h.resize(jmax + 1);
  h[0] = std::pow(std::numbers::pi_v<long double>, -0.25L) *
         std::exp(-0.5L * w * w);
  if (jmax == 0) return;
  h[1] = std::numbers::sqrt2_v<long double> * w * h[0];
  for (int j = 1; j < jmax; ++j) {
    h[j + 1] = std::sqrt(2.0L / (j + 1)) * w * h[j] -
               std::sqrt(static_cast<long double>(j) / (j + 1)) * h[j - 1];
  }
}

}  // namespace

void SmearedProductTable::evaluate(double x, Eigen::MatrixXd& out) const {
  out.resize(nmax_ + 1, nmax_ + 1);
  if (eta_ == 1.0) {
    const std::vector<double> psi = fock_wavefunctions(nmax_, x);
    for (int n = 0; n <= nmax_; ++n) {
      for (int m = n; m <= nmax_; ++m) out(n, m) = out(m, n) = psi[n] * psi[m];
    }
    return;
  }
  const long double w = std::numbers::sqrt2_v<long double> * x * inv_s_;
  std::vector<long double> h;
  hermite_weighted(2 * nmax_, w, h);
  const long double gauss = std::exp(-0.5L * w * w);
  for (int n = 0; n <= nmax_; ++n) {
    for (int m = n; m <= nmax_; ++m) {
      const auto& c = coeff_[static_cast<std::size_t>(m) * (m + 1) / 2 + n];
      long double acc = 0.0L;
      for (int k = n; k >= 0; --k) acc += c[k] * h[n + m - 2 * k];
      out(n, m) = out(m, n) = static_cast<double>(pref_ * gauss * acc);
    }
  }
}

void SmearedProductTable::evaluate_diagonal(double x,
                                            Eigen::VectorXd& out) const {
  out.resize(nmax_ + 1);
  if (eta_ == 1.0) {
    const std::vector<double> psi = fock_wavefunctions(nmax_, x);
    for (int m = 0; m <= nmax_; ++m) out[m] = psi[m] * psi[m];
    return;
  }
  const long double w = std::numbers::sqrt2_v<long double> * x * inv_s_;
  std::vector<long double> h;
  hermite_weighted(2 * nmax_, w, h);
  const long double gauss = std::exp(-0.5L * w * w);
  for (int m = 0; m <= nmax_; ++m) {
    const auto& c = coeff_[static_cast<std::size_t>(m) * (m + 1) / 2 + m];
    long double acc = 0.0L;
    for (int k = m; k >= 0; --k) acc += c[k] * h[2 * m - 2 * k];
    out[m] = static_cast<double>(pref_ * gauss * acc);
  }
}

double smeared_fock_product(int n, int m, double x, double eta) {
  if (n < 0 || m < 0) throw IndexError("smeared_fock_product: negative index");
  SmearedProductTable table(std::max(n, m), eta);
  Eigen::MatrixXd q;
  table.evaluate(x, q);
  return q(n, m);
}

double quadrature_pdf(const StateModel& state, double phi, double x,
                      const DetectorModel& detector) {
  const FockDensityMatrix rho = state.expand();
  const int d = rho.dim();
  SmearedProductTable table(d - 1, detector.eta());
  Eigen::MatrixXd q;
  table.evaluate(x, q);
  // p = sum_nm rho_nm e^{i(m-n)phi} q_nm
  double p = 0.0;
  for (int n = 0; n < d; ++n) p += rho.elements()(n, n).real() * q(n, n);
  for (int delta = 1; delta < d; ++delta) {
    const std::complex<double> phase =
        std::polar(1.0, static_cast<double>(delta) * phi);
    for (int n = 0; n + delta < d; ++n) {
      p += 2.0 * (rho.elements()(n, n + delta) * phase).real() *
           q(n, n + delta);
    }
  }
  return std::max(p, 0.0);
}

}  // namespace homtom
