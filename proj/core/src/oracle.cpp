#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "homtom/errors.hpp"
#include "homtom/kernels.hpp"
#include "quadrature.hpp"

namespace homtom {

namespace {

// Eigendecomposition of the truncated phase-zero quadrature operator
// X = (a^dag + a)/2, reused across phases because X_phi is a diagonal
// rotation of X.
struct QuadratureEigen {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd vectors;
};

const QuadratureEigen& quadrature_eigen(int dim) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureEigen>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[dim];
  if (!slot) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k + 1 < dim; ++k) {
      x(k, k + 1) = x(k + 1, k) = 0.5 * std::sqrt(k + 1.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
    slot = std::make_unique<QuadratureEigen>(
        QuadratureEigen{es.eigenvalues(), es.eigenvectors()});
  }
  return *slot;
}

// Tr[op e^{i r X_phi}] = sum_k w_k e^{i r lambda_k} in the truncated space
std::vector<std::complex<double>> trace_weights(const Eigen::MatrixXcd& op,
                                                double phi, int dim) {
  const auto& eig = quadrature_eigen(dim);
  const int d = static_cast<int>(op.rows());
  // rotate the operator instead of the quadrature: B = D_phi^dag op D_phi
  // is supported on the same d x d block, so w_k only needs that block
  Eigen::MatrixXcd b(d, d);
  for (int j = 0; j < d; ++j) {
    for (int l = 0; l < d; ++l) {
      b(j, l) = op(j, l) * std::polar(1.0, (l - j) * phi);
    }
  }
  std::vector<std::complex<double>> w(dim);
  for (int k = 0; k < dim; ++k) {
    std::complex<double> acc = 0.0;
    for (int j = 0; j < d; ++j) {
      std::complex<double> row = 0.0;
      for (int l = 0; l < d; ++l) row += b(j, l) * eig.vectors(l, k);
      acc += eig.vectors(j, k) * row;
    }
    w[static_cast<std::size_t>(k)] = acc;
  }
  return w;
}

struct Integrand {
  const std::vector<std::complex<double>>* weights;
  const Eigen::VectorXd* lambda;
  double x, delta2;

  // (r/4) e^{r^2 delta^2 / 2} [e^{-irx} T(r) + e^{irx} T(-r)]
  std::complex<double> operator()(double r) const {
    std::complex<double> tp = 0.0, tm = 0.0;
    const auto& w = *weights;
    const auto& lm = *lambda;
    for (int k = 0; k < lm.size(); ++k) {
      const std::complex<double> e = std::polar(1.0, r * lm[k]);
      tp += w[static_cast<std::size_t>(k)] * e;
      tm += w[static_cast<std::size_t>(k)] * std::conj(e);
    }
    const double amp = 0.25 * r * std::exp(0.5 * delta2 * r * r);
    return amp * (std::polar(1.0, -r * x) * tp + std::polar(1.0, r * x) * tm);
  }
};

// composite Gauss-Legendre with panel-doubling until two refinements agree
std::complex<double> integrate_refining(const Integrand& f, double upper,
                                        double panel_hint, double tol) {
  std::complex<double> prev = 0.0;
  int panels = std::max(8, static_cast<int>(std::ceil(upper / panel_hint)));
  for (int round = 0; round < 6; ++round) {
    std::complex<double> acc = 0.0;
    const double width = upper / panels;
    for (int s = 0; s < panels; ++s) {
      const double mid = (s + 0.5) * width, half = 0.5 * width;
      for (int i = 0; i < detail::kGaussN; ++i) {
        acc += half * detail::kGaussW[i] * f(mid + half * detail::kGaussX[i]);
      }
    }
    if (round > 0 && std::abs(acc - prev) <= tol * (1.0 + std::abs(acc))) {
      return acc;
    }
    prev = acc;
    panels *= 2;
  }
  throw ConvergenceError("kernel_oracle: conjugate integral did not settle");
}

std::complex<double> oracle_at_dim(const Eigen::MatrixXcd& op, double x,
                                   double phi, double delta2, int dim) {
  const auto w = trace_weights(op, phi, dim);
  const auto& eig = quadrature_eigen(dim);

  // decay exponent of the true integrand envelope; the r^beta growth from
  // the operator indices delays the rolloff
  const double alpha = 0.125 - 0.5 * delta2;
  const double beta = 2.0 * static_cast<double>(op.rows());
  double upper = 6.0;
  for (int i = 0; i < 40; ++i) {
    upper = std::sqrt((40.0 + (beta + 1.0) * std::log(std::max(upper, 1.0))) /
                      alpha);
  }

  const double rate =
      std::abs(x) + eig.lambda.cwiseAbs().maxCoeff() + upper * delta2 + 1.0;
  const double panel_hint = 2.0 * std::numbers::pi / rate / 2.0;

  Integrand f{&w, &eig.lambda, x, delta2};
  return integrate_refining(f, upper, panel_hint, 1e-11);
}

}  // namespace

std::complex<double> kernel_oracle(const Eigen::MatrixXcd& op, double x,
                                   double phi, double eta) {
  if (op.rows() != op.cols() || op.rows() == 0) {
    throw ValidationError("kernel_oracle: operator matrix must be square");
  }
  if (op.rows() > 30) {
    throw ValidationError("kernel_oracle: supported up to dimension 30");
  }
  if (eta > 1.0 || !(eta > 0.0)) {
    throw DomainError("kernel_oracle: efficiency must lie in (0, 1]");
  }
  if (eta <= 0.5) {
    throw EfficiencyTooLow("kernel_oracle: requires eta > 1/2");
  }

  const double delta2 = (1.0 - eta) / (4.0 * eta);
  const int base = static_cast<int>(op.rows());

  // enlarge the guard band until the truncated trace stops moving
  std::complex<double> prev = oracle_at_dim(op, x, phi, delta2, base + 16);
  for (int guard = 28; guard <= 120; guard += 12) {
    const std::complex<double> cur =
        oracle_at_dim(op, x, phi, delta2, base + guard);
    if (std::abs(cur - prev) <= 1e-9 * (1.0 + std::abs(cur))) return cur;
    prev = cur;
  }
  throw ConvergenceError(
      "kernel_oracle: truncation guard failed to stabilize");
}

}  // namespace homtom
