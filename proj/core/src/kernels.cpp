#include "homtom/kernels.hpp"

#include <cmath>
#include <numbers>

#include "homtom/errors.hpp"
#include "quadrature.hpp"

namespace homtom {

namespace {

constexpr int kClosedFormLimit = 28;  // largest n + m the k-sum resolves

void check_indices(int n, int m) {
  if (n < 0 || m < 0) throw IndexError("kernel_fock: negative Fock index");
}

void check_eta(double eta) {
  if (eta > 1.0 || !(eta > 0.0)) {
    throw DomainError("kernel: efficiency must lie in (0, 1]");
  }
  if (eta <= 0.5) {
    throw EfficiencyTooLow(
        "kernel: inefficiency deconvolution requires eta > 1/2, got " +
        std::to_string(eta));
  }
}

// signed coefficients of the closed-form sum
//   R_nm(x) = sum_{k=0}^{n} c_k * 2 * (Re|Im) dtilde[d + 2k + 2](kappa x),
// with everything x-independent folded in:
//   c_k = sgn_d (-1)^k sqrt(n!/m!) kappa^{d+2} C(m, n-k) kappa^{2k}/k!
//         (d + 2k + 1)!
std::vector<double> closed_coefficients(int n, int m, double kappa2) {
  const int d = m - n;
  const double log_kappa2 = std::log(kappa2);
  const double base = 0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)) +
                      0.5 * (d + 2) * log_kappa2;
  const double sgn_d = (d % 2 == 0 ? (d / 2) % 2 : ((d - 1) / 2) % 2) ? -1.0
                                                                      : 1.0;
  std::vector<double> c(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double lg = base + std::lgamma(m + 1.0) -
                      std::lgamma(n - k + 1.0) - std::lgamma(d + k + 1.0) +
                      k * log_kappa2 - std::lgamma(k + 1.0) +
                      std::lgamma(d + 2 * k + 2.0);
    c[k] = (k % 2 ? -2.0 : 2.0) * sgn_d * std::exp(lg);
  }
  return c;
}

double closed_sum(const std::vector<double>& c, int d, bool use_imag,
                  const std::vector<std::complex<double>>& dt) {
  double acc = 0.0;
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k) {
    const std::complex<double>& v = dt[static_cast<std::size_t>(d + 2 * k + 2)];
    acc += c[static_cast<std::size_t>(k)] * (use_imag ? v.imag() : v.real());
  }
  return acc;
}

// Oscillatory quadrature of the Laguerre-transform representation
//   R_{n,n+d} = kappa^{d+2} 2 sgn_d (Re|Im) sqrt(n!/m!)
//               int_0^inf t^{d+1} L_n^{(d)}(kappa^2 t^2)
//               e^{-t^2/2} e^{2iyt} dt,
// evaluated for all n = 0..nmax at once: the Laguerre upward recurrence
// runs per node and the integrals accumulate per order.  Composite
// Gauss-Legendre panels are sized from the fastest local oscillation.
void laguerre_transform_sweep(int d, int nmax, double kappa2, double y,
                              std::vector<std::complex<double>>& integrals) {
  // Segments continue past the classically allowed region until two
  // consecutive panel contributions fall below 1e-18 of the largest one
  // seen: the Laguerre factor keeps growing out there and only the
  // Gaussian tames it, so a fixed endpoint has no safe closed form.
  const double tmin = std::sqrt(2.0 * (nmax + 2.0 * d + 20.0));
  const double freq = std::max({2.0 * std::abs(y),
                                std::sqrt(4.0 * nmax * kappa2 + 2.0 * d * kappa2),
                                2.0});
  const double width = 2.0 * std::numbers::pi / freq / 2.5;

  integrals.assign(nmax + 1, std::complex<double>(0.0, 0.0));
  std::vector<double> lag(nmax + 1);
  std::vector<std::complex<double>> seg(nmax + 1);
  double scale = 0.0;
  int quiet = 0;
  for (int iseg = 0;; ++iseg) {
    const double a = iseg * width;
    const double b = a + width;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    std::fill(seg.begin(), seg.end(), std::complex<double>(0.0, 0.0));
    for (int i = 0; i < detail::kGaussN; ++i) {
      const double t = mid + half * detail::kGaussX[i];
      const double X = kappa2 * t * t;
      lag[0] = 1.0;
      if (nmax >= 1) lag[1] = 1.0 + d - X;
      for (int k = 1; k < nmax; ++k) {
        lag[k + 1] =
            ((2.0 * k + 1.0 + d - X) * lag[k] - (k + d) * lag[k - 1]) /
            (k + 1.0);
      }
      const double mag =
          half * detail::kGaussW[i] *
          std::exp((d + 1) * std::log(t) - 0.5 * t * t);
      const std::complex<double> w = mag * std::polar(1.0, 2.0 * y * t);
      for (int k = 0; k <= nmax; ++k) seg[k] += lag[k] * w;
    }
    double seg_norm = 0.0;
    for (int k = 0; k <= nmax; ++k) {
      integrals[k] += seg[k];
      seg_norm = std::max(seg_norm, std::abs(seg[k]));
    }
    scale = std::max(scale, seg_norm);
    if (b >= tmin) {
      quiet = seg_norm <= 1e-18 * scale ? quiet + 1 : 0;
      if (quiet >= 2 || b > 80.0) break;
    }
  }
}

std::complex<double> kernel_quadrature(int n, int m, double x, double phi,
                                       double kappa2) {
  const int d = m - n;
  const double kappa = std::sqrt(kappa2);
  const double y = kappa * x;
  std::vector<std::complex<double>> integrals;
  laguerre_transform_sweep(d, n, kappa2, y, integrals);
  const double lnorm = 0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0));
  const std::complex<double> acc = std::exp(lnorm) * integrals[n];
  const double sgn =
      (d % 2 == 0 ? (d / 2) % 2 : ((d - 1) / 2) % 2) ? -1.0 : 1.0;
  const double val = 2.0 * sgn * (d % 2 == 0 ? acc.real() : acc.imag());
  const double r = std::pow(kappa, d + 2) * val;
  return std::polar(r, -d * phi);
}

}  // namespace

std::complex<double> kernel_fock(int n, int m, double x, double phi,
                                 double eta) {
  check_indices(n, m);
  check_eta(eta);
  if (n > m) return std::conj(kernel_fock(m, n, x, phi, eta));

  const double kappa2 = eta / (2.0 * eta - 1.0);
  const int d = m - n;
  if (n + m <= kClosedFormLimit) {
    const double kappa = std::sqrt(kappa2);
    const auto dt = dtilde_array(kappa * x, n + m + 2);
    const auto c = closed_coefficients(n, m, kappa2);
    const double r = closed_sum(c, d, d % 2 != 0, dt);
    return std::polar(r, -d * phi);
  }
  return kernel_quadrature(n, m, x, phi, kappa2);
}

KernelBank::KernelBank(int dim, double eta) : dim_(dim), eta_(eta) {
  if (dim < 1) throw ValidationError("KernelBank: dimension must be >= 1");
  check_eta(eta);
  kappa2_ = eta / (2.0 * eta - 1.0);
  kappa_ = std::sqrt(kappa2_);

  dt_order_ = 0;
  for (int n = 0; n < dim; ++n) {
    for (int m = n; m < dim; ++m) {
      if (n + m <= kClosedFormLimit) {
        closed_.push_back(
            {n, m, (m - n) % 2 != 0, closed_coefficients(n, m, kappa2_)});
        dt_order_ = std::max(dt_order_, n + m + 2);
      } else {
        quad_.emplace_back(n, m);
      }
    }
  }
}

void KernelBank::evaluate(double x, double phi, Eigen::MatrixXcd& out) const {
  out.resize(dim_, dim_);
  const auto dt = dtilde_array(kappa_ * x, dt_order_);

  // phase ladder e^{-i d phi}
  std::vector<std::complex<double>> phase(dim_);
  phase[0] = 1.0;
  if (dim_ > 1) {
    const std::complex<double> step = std::polar(1.0, -phi);
    for (int d = 1; d < dim_; ++d) phase[d] = phase[d - 1] * step;
  }

  for (const auto& pc : closed_) {
    const double r = closed_sum(pc.c, pc.m - pc.n, pc.use_imag, dt);
    const std::complex<double> v = r * phase[pc.m - pc.n];
    out(pc.n, pc.m) = v;
    out(pc.m, pc.n) = std::conj(v);
  }
  for (const auto& [n, m] : quad_) {
    const std::complex<double> v =
        kernel_quadrature(n, m, x, 0.0, kappa2_) * phase[m - n];
    out(n, m) = v;
    out(m, n) = std::conj(v);
  }
}

void KernelBank::evaluate_diagonal(double x, Eigen::VectorXd& out) const {
  out.resize(dim_);
  if (2 * (dim_ - 1) <= kClosedFormLimit) {
    const auto dt = dtilde_array(kappa_ * x, dt_order_);
    for (const auto& pc : closed_) {
      if (pc.n == pc.m) out[pc.n] = closed_sum(pc.c, 0, false, dt);
    }
    return;
  }
  // one Laguerre-transform sweep yields every diagonal order at once
  std::vector<std::complex<double>> integrals;
  laguerre_transform_sweep(0, dim_ - 1, kappa2_, kappa_ * x, integrals);
  for (int m = 0; m < dim_; ++m) {
    out[m] = kappa2_ * 2.0 * integrals[m].real();
  }
}

}  // namespace homtom
