#include "homtom/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "envelope_grid.hpp"
#include "homtom/averaging.hpp"
#include "homtom/errors.hpp"
#include "homtom/kernels.hpp"
#include "homtom/parallel.hpp"
#include "homtom/rng.hpp"
#include "homtom/states.hpp"

namespace homtom {
namespace {

using complex = std::complex<double>;

constexpr double kLoglikFloor = 1e-300;
constexpr int kGridPoints = 4096;
constexpr std::uint64_t kNoiseSlot = std::uint64_t{1} << 30;

void check_xi(const std::complex<double>& xi) {
  if (!(std::abs(xi) < 1.0)) {
    throw DomainError("twin-beam parameter must satisfy |xi| < 1, got |xi| = " +
                      std::to_string(std::abs(xi)));
  }
}

// twin-beam Fock weights c_m = (1 - |xi|^2) |xi|^{2m}
double fock_weight(const std::complex<double>& xi, int m) {
  const double r = std::norm(xi);
  return (1.0 - r) * std::pow(r, m);
}

}  // namespace

namespace {

// Physical route for matrix elements the alternating outcome series cannot
// deliver in double precision: mix |m> with a thermal mode of mean nbar on
// a beam splitter of transmissivity eta and count one output port.  Every
// contribution is a nonnegative probability, so accuracy is set purely by
// the thermal tail cut.  Per ancilla occupation j the two-mode rotation is
// exp(theta G) on the total-photon block M = m + j; conjugating by
// diag(i^k) turns -iG into a real symmetric tridiagonal matrix, and
//   |<n| exp(theta G) |m>|^2
//     = |sum_v V_nv V_mv e^{i theta lambda_v}|^2
// with (lambda, V) its eigensystem.
double povm_beam_splitter(double eta, double nbar, int n, int m) {
  const double theta = std::atan2(std::sqrt(1.0 - eta), std::sqrt(eta));
  const double ratio = nbar / (1.0 + nbar);
  int jmax = 0;
  if (nbar > 0.0) {
    jmax = static_cast<int>(std::ceil(std::log(1e-18) / std::log(ratio)));
  }
  jmax = std::max(jmax, n - m);  // outcome n needs at least n - m ancilla photons

  double total = 0.0;
  double weight = 1.0 / (1.0 + nbar);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for (int j = 0; j <= jmax; ++j, weight *= ratio) {
    const int blk = m + j;
    if (n <= blk && weight > 0.0) {
      Eigen::VectorXd diag = Eigen::VectorXd::Zero(blk + 1);
      Eigen::VectorXd sub(blk);
      for (int k = 0; k < blk; ++k) {
        sub(k) = std::sqrt(static_cast<double>(k + 1) * (blk - k));
      }
      es.computeFromTridiagonal(diag, sub);
      const Eigen::MatrixXd& v = es.eigenvectors();
      double c = 0.0, s = 0.0;
      for (int q = 0; q <= blk; ++q) {
        const double pair = v(n, q) * v(m, q);
        c += pair * std::cos(theta * es.eigenvalues()(q));
        s += pair * std::sin(theta * es.eigenvalues()(q));
      }
      total += weight * (c * c + s * s);
    }
    if (nbar == 0.0) break;
  }
  return total;
}

}  // namespace

double theoretical_povm(double eta, double nbar, int n, int m) {
  if (!(eta > 0.0) || eta > 1.0) {
    throw DomainError("theoretical_povm: eta must lie in (0, 1], got " +
                      std::to_string(eta));
  }
  if (nbar < 0.0) {
    throw DomainError("theoretical_povm: nbar must be >= 0, got " +
                      std::to_string(nbar));
  }
  if (n < 0 || m < 0) {
    throw IndexError("theoretical_povm: outcome and Fock index must be >= 0");
  }

  const double z = (1.0 - eta) * nbar;
  if (z == 0.0) {
    // pure loss: binomial thinning of the m-photon input
    if (m < n) return 0.0;
    double v = std::pow(1.0 - eta, m - n);
    for (int j = 0; j < n; ++j) {
      v *= eta * static_cast<double>(m - j) / static_cast<double>(j + 1);
    }
    return v;
  }
  if (z >= 1.0) {
    throw ConvergenceError(
        "theoretical_povm: dark-count series diverges for (1-eta)*nbar >= 1, "
        "got " +
        std::to_string(z));
  }

  double sum = 0.0;
  double peak = 0.0;
  double cnk = 1.0;  // C(n+k, k)
  int quiet = 0;
  for (int k = 0; k < 10000; ++k) {
    if (k > 0) cnk *= static_cast<double>(n + k) / static_cast<double>(k);
    const int kn = k + n;
    const int jmax = std::min(m, kn);
    double term = std::pow(z, kn);
    double inner = term;
    for (int j = 0; j < jmax; ++j) {
      term *= (static_cast<double>(m - j) / static_cast<double>(j + 1)) *
              (static_cast<double>(kn - j) / static_cast<double>(j + 1)) *
              (eta / z);
      inner += term;
    }
    const double contrib = (k % 2 == 0 ? 1.0 : -1.0) * cnk * inner;
    sum += contrib;
    peak = std::max(peak, std::abs(contrib));
    if (!std::isfinite(sum)) break;
    if (std::abs(contrib) < 1e-14 * (std::abs(sum) + 1e-30)) {
      if (++quiet >= 2) break;
    } else {
      quiet = 0;
    }
    if (k == 9999) {
      throw ConvergenceError(
          "theoretical_povm: outcome series did not converge within 10000 "
          "terms");
    }
  }
  // the alternating sum sheds a digit per decade of peak/|sum|; past six
  // decades hand the element to the cancellation-free construction
  if (!std::isfinite(sum) || peak > 1e6 * std::abs(sum)) {
    return povm_beam_splitter(eta, nbar, n, m);
  }
  return sum;
}

Eigen::MatrixXd theoretical_povm_table(double eta, double nbar, int n_max,
                                       int dim) {
  if (n_max < 0 || dim < 1) {
    throw DomainError("theoretical_povm_table: need n_max >= 0 and dim >= 1");
  }
  Eigen::MatrixXd table(n_max + 1, dim);
  for (int n = 0; n <= n_max; ++n) {
    for (int m = 0; m < dim; ++m) table(n, m) = theoretical_povm(eta, nbar, n, m);
  }
  return table;
}

BipartiteState::BipartiteState(int da, int db, Eigen::MatrixXcd matrix)
    : dim_a(da), dim_b(db), r(std::move(matrix)) {
  if (da < 1 || db < 1) {
    throw DomainError("BipartiteState: dimensions must be >= 1");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(da) * db;
  if (r.rows() != n || r.cols() != n) {
    throw DomainError("BipartiteState: matrix is " + std::to_string(r.rows()) +
                      "x" + std::to_string(r.cols()) + ", expected " +
                      std::to_string(n) + "x" + std::to_string(n));
  }
  if ((r - r.adjoint()).cwiseAbs().maxCoeff() > 1e-8) {
    throw DomainError("BipartiteState: matrix is not Hermitian");
  }
  if (std::abs(r.trace().real() - 1.0) > 1e-8) {
    throw DomainError("BipartiteState: trace is " +
                      std::to_string(r.trace().real()) + ", expected 1");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
  if (es.eigenvalues().minCoeff() < -1e-8) {
    throw DomainError("BipartiteState: matrix is not positive semidefinite");
  }
}

BipartiteState BipartiteState::twin_beam(std::complex<double> xi,
                                         int truncation) {
  check_xi(xi);
  if (truncation < 1) {
    throw DomainError("twin_beam: truncation must be >= 1");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(truncation) * truncation;
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
  for (int m = 0; m < truncation; ++m) {
    psi[static_cast<Eigen::Index>(m) * truncation + m] =
        std::pow(xi, m);  // relative weights xi^m on |m>|m>
  }
  psi /= psi.norm();
  return {truncation, truncation, psi * psi.adjoint()};
}

BipartiteState BipartiteState::maximally_entangled(int dim) {
  if (dim < 1) {
    throw DomainError("maximally_entangled: dimension must be >= 1");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(dim) * dim;
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
  for (int m = 0; m < dim; ++m) {
    psi[static_cast<Eigen::Index>(m) * dim + m] = 1.0;
  }
  psi /= psi.norm();
  return {dim, dim, psi * psi.adjoint()};
}

BipartiteState BipartiteState::product_vacuum(int da, int db) {
  if (da < 1 || db < 1) {
    throw DomainError("product_vacuum: dimensions must be >= 1");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(da) * db;
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(n, n);
  r(0, 0) = 1.0;
  return {da, db, std::move(r)};
}

Eigen::MatrixXcd conditional_map_matrix(const BipartiteState& state) {
  const int da = state.dim_a, db = state.dim_b;
  if (static_cast<long>(da) * db > 4096) {
    throw DomainError("conditional_map_matrix: joint dimension above 4096");
  }
  Eigen::MatrixXcd s(static_cast<Eigen::Index>(db) * db,
                     static_cast<Eigen::Index>(da) * da);
  for (int i = 0; i < db; ++i) {
    for (int l = 0; l < db; ++l) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * db + l;
      for (int k = 0; k < da; ++k) {
        for (int j = 0; j < da; ++j) {
          s(row, static_cast<Eigen::Index>(k) * da + j) =
              state.r(static_cast<Eigen::Index>(j) * db + i,
                      static_cast<Eigen::Index>(k) * db + l);
        }
      }
    }
  }
  return s;
}

std::pair<Eigen::MatrixXcd, double> conditional_state(
    const BipartiteState& state, const Eigen::MatrixXcd& pi) {
  const int da = state.dim_a, db = state.dim_b;
  if (pi.rows() != da || pi.cols() != da) {
    throw DomainError("conditional_state: detector element must be " +
                      std::to_string(da) + "x" + std::to_string(da));
  }
  Eigen::MatrixXcd sigma = Eigen::MatrixXcd::Zero(db, db);
  for (int i = 0; i < db; ++i) {
    for (int l = 0; l < db; ++l) {
      complex acc = 0.0;
      for (int j = 0; j < da; ++j) {
        for (int k = 0; k < da; ++k) {
          acc += state.r(static_cast<Eigen::Index>(j) * db + i,
                         static_cast<Eigen::Index>(k) * db + l) *
                 pi(k, j);
        }
      }
      sigma(i, l) = acc;
    }
  }
  return {sigma, sigma.trace().real()};
}

FaithfulnessReport faithfulness_check(const BipartiteState& state) {
  const Eigen::MatrixXcd s = conditional_map_matrix(state);
  const Eigen::Index need = static_cast<Eigen::Index>(state.dim_a) * state.dim_a;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s);
  const Eigen::VectorXd sv = svd.singularValues();

  FaithfulnessReport report;
  const double largest = sv.size() > 0 ? sv[0] : 0.0;
  const double smallest = sv.size() >= need ? sv[need - 1] : 0.0;
  if (largest <= 0.0 || smallest <= 1e-10 * largest) {
    report.faithful = false;
    report.condition_number = std::numeric_limits<double>::infinity();
  } else {
    report.faithful = true;
    report.condition_number = largest / smallest;
  }
  return report;
}

Eigen::MatrixXcd povm_from_conditionals(const BipartiteState& state,
                                        const Eigen::MatrixXcd& sigma) {
  const int da = state.dim_a, db = state.dim_b;
  if (sigma.rows() != db || sigma.cols() != db) {
    throw DomainError("povm_from_conditionals: conditioned state must be " +
                      std::to_string(db) + "x" + std::to_string(db));
  }
  if (!faithfulness_check(state).faithful) {
    throw SingularBasis(
        "povm_from_conditionals: state is not faithful, the conditional map "
        "cannot be inverted");
  }
  const Eigen::MatrixXcd s = conditional_map_matrix(state);
  Eigen::VectorXcd y(static_cast<Eigen::Index>(db) * db);
  for (int i = 0; i < db; ++i) {
    for (int l = 0; l < db; ++l) {
      y[static_cast<Eigen::Index>(i) * db + l] = sigma(i, l);
    }
  }
  const Eigen::VectorXcd x = s.colPivHouseholderQr().solve(y);
  Eigen::MatrixXcd pi(da, da);
  for (int k = 0; k < da; ++k) {
    for (int j = 0; j < da; ++j) {
      pi(k, j) = x[static_cast<Eigen::Index>(k) * da + j];
    }
  }
  return pi;
}

namespace {

int auto_twin_beam_truncation(double xi2) {
  if (xi2 == 0.0) return 1;
  // smallest T with twin-beam mass 1 - |xi|^{2T} >= 0.999
  const int t = static_cast<int>(std::ceil(std::log(1e-3) / std::log(xi2)));
  return std::max(t, 1);
}

// cumulative outcome distribution of the detector on the m-photon input,
// extended until the tail is below 1e-12 (the remainder lands on the last
// entry)
std::vector<double> outcome_cdf(double eta, double nbar, int m) {
  std::vector<double> cdf;
  double acc = 0.0;
  for (int n = 0; n < 4096; ++n) {
    acc += theoretical_povm(eta, nbar, n, m);
    cdf.push_back(acc);
    if (acc >= 1.0 - 1e-12) break;
  }
  return cdf;
}

std::size_t invert_cdf(const std::vector<double>& cdf, double u) {
  const double target = u * cdf.back();
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.end()) return cdf.size() - 1;
  return static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

std::vector<JointRecord> simulate_joint(std::complex<double> xi, double eta,
                                        double nbar, double eta_h,
                                        std::size_t count, std::uint64_t seed,
                                        int truncation, unsigned jobs) {
  check_xi(xi);
  if (count < 1) {
    throw DomainError("simulate_joint: need at least one record");
  }
  if (truncation < 0) {
    throw DomainError("simulate_joint: truncation must be >= 0");
  }
  const DetectorModel homodyne(eta_h);  // validates eta_h
  const double xi2 = std::norm(xi);
  int trunc = truncation;
  if (trunc == 0) {
    trunc = auto_twin_beam_truncation(xi2);
  } else {
    const double mass = 1.0 - std::pow(xi2, trunc);
    if (mass < 0.999) {
      throw TruncationError("simulate_joint: truncation " +
                            std::to_string(trunc) + " holds only " +
                            std::to_string(mass) + " of the twin-beam mass");
    }
  }

  // photon-number weights of arm B, the outcome table per input m, and one
  // proposal envelope per Fock state
  std::vector<double> mcdf(static_cast<std::size_t>(trunc));
  {
    double acc = 0.0, w = 1.0;
    for (int m = 0; m < trunc; ++m, w *= xi2) {
      acc += w;
      mcdf[static_cast<std::size_t>(m)] = acc;
    }
  }
  std::vector<std::vector<double>> ncdf(static_cast<std::size_t>(trunc));
  for (int m = 0; m < trunc; ++m) {
    ncdf[static_cast<std::size_t>(m)] = outcome_cdf(eta, nbar, m);
  }

  const double xmax = std::sqrt(static_cast<double>(trunc)) + 5.0;
  const double dx = 2.0 * xmax / (kGridPoints - 1);
  std::vector<detail::EnvelopeGrid> env(static_cast<std::size_t>(trunc));
  {
    std::vector<std::vector<double>> nodes(
        static_cast<std::size_t>(trunc),
        std::vector<double>(kGridPoints));
    for (int g = 0; g < kGridPoints; ++g) {
      const auto psi = fock_wavefunctions(trunc - 1, -xmax + g * dx);
      for (int m = 0; m < trunc; ++m) {
        nodes[static_cast<std::size_t>(m)][static_cast<std::size_t>(g)] =
            psi[static_cast<std::size_t>(m)] * psi[static_cast<std::size_t>(m)];
      }
    }
    for (int m = 0; m < trunc; ++m) {
      env[static_cast<std::size_t>(m)].build(-xmax, dx,
                                             nodes[static_cast<std::size_t>(m)]);
    }
  }

  const double noise_sd = std::sqrt(homodyne.noise_variance());
  const rng::Stream stream(seed, "joint-sampler");
  std::vector<JointRecord> records(count);
  parallel::for_chunks(
      count, jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const int m = static_cast<int>(invert_cdf(mcdf, stream.uniform(i, 0)));
          const auto& col = ncdf[static_cast<std::size_t>(m)];
          const int n = static_cast<int>(invert_cdf(col, stream.uniform(i, 1)));
          const double phi = std::numbers::pi * stream.uniform(i, 2);

          double x = 0.0;
          bool accepted = false;
          for (std::uint64_t t = 0; t < 100000; ++t) {
            double prop, height;
            env[static_cast<std::size_t>(m)].propose(
                stream.uniform(i, 3 + 2 * t), &prop, &height);
            const double psi = fock_wavefunction(m, prop);
            if (stream.uniform(i, 4 + 2 * t) * height <= psi * psi) {
              x = prop;
              accepted = true;
              break;
            }
          }
          if (!accepted) {
            throw NumericalError(
                "simulate_joint: rejection sampling failed to accept");
          }
          if (noise_sd > 0.0) x += noise_sd * stream.normal(i, kNoiseSlot);
          records[i] = {n, phi, x};
        }
      });
  return records;
}

DiagonalPOVM calibrate_averaging(std::span<const JointRecord> records,
                                 std::complex<double> xi, double eta_h,
                                 int n_max, int dim, unsigned jobs) {
  check_xi(xi);
  if (n_max < 0 || dim < 1) {
    throw DomainError("calibrate_averaging: need n_max >= 0 and dim >= 1");
  }
  if (records.empty()) {
    throw InsufficientData("calibrate_averaging: no records");
  }
  if (fock_weight(xi, dim - 1) < 1e-280) {
    throw DomainError(
        "calibrate_averaging: twin-beam weight underflows at m = " +
        std::to_string(dim - 1) + "; reduce dim or increase |xi|");
  }

  const KernelBank bank(dim, eta_h);  // enforces the eta_h > 1/2 bound

  // partition record indices by outcome
  std::vector<std::vector<std::size_t>> bins(
      static_cast<std::size_t>(n_max) + 1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int n = records[i].n;
    if (n < 0) {
      throw DomainError("calibrate_averaging: negative outcome in record " +
                        std::to_string(i));
    }
    if (n <= n_max) bins[static_cast<std::size_t>(n)].push_back(i);
  }
  for (int n = 0; n <= n_max; ++n) {
    if (bins[static_cast<std::size_t>(n)].empty()) {
      throw EmptyOutcomeBin("calibrate_averaging: no records with outcome " +
                            std::to_string(n));
    }
  }

  const double total = static_cast<double>(records.size());
  DiagonalPOVM out;
  out.n_max = n_max;
  out.dim = dim;
  out.method = "averaging";
  out.p.resize(n_max + 1, dim);
  out.err.resize(n_max + 1, dim);

  using Moments = std::vector<RunningMoments>;
  for (int n = 0; n <= n_max; ++n) {
    const auto& bin = bins[static_cast<std::size_t>(n)];
    Moments moments = parallel::map_reduce<Moments>(
        bin.size(), jobs,
        [&](std::size_t, std::size_t begin, std::size_t end) {
          Moments part(static_cast<std::size_t>(dim));
          Eigen::VectorXd work;
          for (std::size_t j = begin; j < end; ++j) {
            bank.evaluate_diagonal(records[bin[j]].x, work);
            for (int m = 0; m < dim; ++m) {
              part[static_cast<std::size_t>(m)].add(work[m]);
            }
          }
          return part;
        },
        Moments(static_cast<std::size_t>(dim)),
        [](Moments acc, const Moments& part) {
          for (std::size_t m = 0; m < acc.size(); ++m) acc[m].merge(part[m]);
          return acc;
        });

    const double phat = static_cast<double>(bin.size()) / total;
    // Wilson-score standard error at one sigma
    const double sigma_p =
        std::sqrt(phat * (1.0 - phat) / total + 1.0 / (4.0 * total * total)) /
        (1.0 + 1.0 / total);
    for (int m = 0; m < dim; ++m) {
      const double weight = fock_weight(xi, m);
      const double rho_mm = moments[static_cast<std::size_t>(m)].mean;
      const double rho_se = moments[static_cast<std::size_t>(m)].std_error();
      out.p(n, m) = phat * rho_mm / weight;
      out.err(n, m) = std::hypot(rho_mm * sigma_p, phat * rho_se) / weight;
    }
  }
  return out;
}

namespace {

// row-major so each record's weight row is contiguous in the hot loop
using RecordMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MlTable {
  RecordMatrix wq;           // rows = records, cols = m; c_m q_m(x_i)
  std::vector<int> bin;      // outcome row per record, overflow pooled last
  int rows = 0;              // n_max + 2
  int dim = 0;
};

// the likelihood model must cover every Fock column the source populates,
// not just the columns the caller wants reported; records fed by a column
// missing from the model would be forced into the reported ones and bias
// them.  Extend until the twin-beam tail mass |xi|^{2T} is negligible: a
// 1e-5 cut leaves of order count / 1e5 stray records, far below the
// sampling error of any reported entry, while each extra column costs a
// full E-step pass.
int model_truncation(double xi2, int dim) {
  if (xi2 <= 0.0) return dim;
  const int tail =
      static_cast<int>(std::ceil(std::log(1e-5) / std::log(xi2)));
  return std::max(dim, tail);
}

MlTable build_ml_table(std::span<const JointRecord> records,
                       const std::complex<double>& xi, double eta_h, int n_max,
                       int dim, unsigned jobs) {
  MlTable t;
  t.rows = n_max + 2;
  t.dim = dim;
  t.wq.resize(static_cast<Eigen::Index>(records.size()), dim);
  t.bin.resize(records.size());
  Eigen::VectorXd weights(dim);
  for (int m = 0; m < dim; ++m) weights[m] = fock_weight(xi, m);

  const SmearedProductTable table(dim - 1, eta_h);
  parallel::for_chunks(
      records.size(), jobs,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        Eigen::VectorXd work;
        for (std::size_t i = begin; i < end; ++i) {
          if (records[i].n < 0) {
            throw DomainError("calibrate_ml: negative outcome in record " +
                              std::to_string(i));
          }
          t.bin[i] = std::min(records[i].n, n_max + 1);
          table.evaluate_diagonal(records[i].x, work);
          t.wq.row(static_cast<Eigen::Index>(i)) =
              (work.cwiseProduct(weights)).transpose();
        }
      });
  return t;
}

struct EmFit {
  Eigen::MatrixXd table;
  double loglik = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;
};

// expectation-maximization over column-stochastic outcome tables; the
// likelihood is concave and every update renormalizes each Fock column.
// Plain EM crawls once the iterate nears the optimum, so each cycle takes
// two EM steps and extrapolates them quadratically, falling back to the
// unaccelerated step whenever the extrapolated table fails to improve the
// likelihood; recorded likelihoods stay non-decreasing either way.
// Convergence requires the relative improvement to stay below an internally
// tightened tolerance for 5 successive records and the fixed-point residual
// (departure of the update multipliers from 1 on the support) to reach
// 10 * tol, which pins the final likelihood well inside 1e-6.  The residual
// is checked on the first report_cols columns; tail columns carry almost no
// source weight and creep toward their fixed point long after the reported
// ones have settled.
EmFit run_povm_em(const MlTable& t, Eigen::MatrixXd table, int report_cols,
                  std::size_t max_iters, double tol, unsigned jobs,
                  bool keep_trace) {
  struct Partial {
    Eigen::MatrixXd s;
    double loglik;
  };
  const int rows = t.rows, dim = t.dim;

  const auto estep = [&](const Eigen::MatrixXd& tab) {
    return parallel::map_reduce<Partial>(
        t.bin.size(), jobs,
        [&](std::size_t, std::size_t begin, std::size_t end) {
          Partial part{Eigen::MatrixXd::Zero(rows, dim), 0.0};
          for (std::size_t i = begin; i < end; ++i) {
            const int b = t.bin[i];
            const auto row = t.wq.row(static_cast<Eigen::Index>(i));
            const double p = row.dot(tab.row(b));
            part.loglik += std::log(std::max(p, kLoglikFloor));
            if (p < 1e-250) continue;
            part.s.row(b) += row * (1.0 / p);
          }
          return part;
        },
        Partial{Eigen::MatrixXd::Zero(rows, dim), 0.0},
        [](Partial acc, const Partial& part) {
          acc.s += part.s;
          acc.loglik += part.loglik;
          return acc;
        });
  };
  const auto em_update = [&](const Eigen::MatrixXd& tab,
                             const Eigen::MatrixXd& s) {
    Eigen::MatrixXd next = tab.cwiseProduct(s);
    for (int m = 0; m < dim; ++m) {
      const double colsum = next.col(m).sum();
      if (colsum > 0.0) {
        next.col(m) /= colsum;
      } else {
        next.col(m) = tab.col(m);  // no record carries weight on this m
      }
    }
    return next;
  };

  EmFit fit;
  double prev = -std::numeric_limits<double>::infinity();
  double inner_tol = tol;
  const double residual_target = 10.0 * tol;
  int streak = 0;
  const auto record = [&](double loglik) {
    if (keep_trace) fit.loglik_trace.push_back(loglik);
    const double rel = std::abs(loglik - prev) / (1.0 + std::abs(loglik));
    prev = loglik;
    streak = rel < inner_tol ? streak + 1 : 0;
  };

  while (fit.iterations < max_iters) {
    const Partial a0 = estep(table);
    record(a0.loglik);
    if (streak >= 5) {
      // multipliers g_bm / nu_m equal 1 on the support at a fixed point;
      // entries at the simplex boundary are exempt
      double residual = 0.0;
      for (int m = 0; m < report_cols && m < dim; ++m) {
        const double nu = table.col(m).dot(a0.s.col(m));
        if (!(nu > 0.0)) continue;
        for (int b = 0; b < rows; ++b) {
          if (table(b, m) <= 1e-10) continue;
          residual = std::max(residual, std::abs(a0.s(b, m) / nu - 1.0));
        }
      }
      if (residual <= residual_target) {
        fit.converged = true;
        break;
      }
      inner_tol *= 0.1;
      streak = 0;
    }

    const Eigen::MatrixXd p1 = em_update(table, a0.s);
    if (++fit.iterations >= max_iters) {
      table = p1;
      break;
    }
    const Partial a1 = estep(p1);
    record(a1.loglik);
    Eigen::MatrixXd p2 = em_update(p1, a1.s);
    if (++fit.iterations >= max_iters) {
      table = std::move(p2);
      break;
    }

    const Eigen::MatrixXd r = p1 - table;
    const Eigen::MatrixXd v = p2 - p1 - r;
    const double vnorm = v.norm();
    if (!(vnorm > 0.0)) {
      table = std::move(p2);
      continue;
    }
    const double alpha = std::min(-r.norm() / vnorm, -1.0);
    Eigen::MatrixXd cand =
        (table - 2.0 * alpha * r + (alpha * alpha) * v).cwiseMax(1e-16);
    for (int m = 0; m < dim; ++m) cand.col(m) /= cand.col(m).sum();
    const Partial ac = estep(cand);
    if (ac.loglik >= a1.loglik) {
      record(ac.loglik);
      table = em_update(cand, ac.s);
      ++fit.iterations;
    } else {
      table = std::move(p2);
    }
  }
  fit.table = std::move(table);
  fit.loglik = prev;
  return fit;
}

}  // namespace

CalibrationMlResult calibrate_ml(std::span<const JointRecord> records,
                                 std::complex<double> xi, double eta_h,
                                 int n_max, int dim,
                                 const CalibrationMlConfig& config) {
  check_xi(xi);
  if (n_max < 0 || dim < 1) {
    throw DomainError("calibrate_ml: need n_max >= 0 and dim >= 1");
  }
  if (records.empty()) {
    throw InsufficientData("calibrate_ml: no records");
  }
  if (!(config.tol > 0.0)) {
    throw DomainError("calibrate_ml: tolerance must be positive");
  }
  if (config.max_iters < 1) {
    throw DomainError("calibrate_ml: max_iters must be >= 1");
  }
  if (config.bootstrap != 0 && config.bootstrap < 20) {
    throw DomainError(
        "calibrate_ml: bootstrap resamples must be 0 or >= 20, got " +
        std::to_string(config.bootstrap));
  }

  const int model_dim = model_truncation(std::norm(xi), dim);
  const MlTable t =
      build_ml_table(records, xi, eta_h, n_max, model_dim, config.jobs);
  const int rows = t.rows;

  Eigen::MatrixXd start =
      Eigen::MatrixXd::Constant(rows, model_dim, 1.0 / rows);
  if (config.initial.size() != 0) {
    if (config.initial.rows() != rows || config.initial.cols() != dim) {
      throw DomainError("calibrate_ml: initial table must be " +
                        std::to_string(rows) + "x" + std::to_string(dim));
    }
    if (config.initial.minCoeff() < 0.0) {
      throw DomainError("calibrate_ml: initial table has negative entries");
    }
    for (int m = 0; m < dim; ++m) {
      const double colsum = config.initial.col(m).sum();
      if (!(colsum > 0.0)) {
        throw DomainError("calibrate_ml: initial table column " +
                          std::to_string(m) + " sums to zero");
      }
      start.col(m) = config.initial.col(m) / colsum;
    }
  }

  EmFit fit = run_povm_em(t, std::move(start), dim, config.max_iters,
                          config.tol, config.jobs, true);

  CalibrationMlResult result;
  result.iterations = fit.iterations;
  result.loglik = fit.loglik;
  result.converged = fit.converged;
  result.loglik_trace = std::move(fit.loglik_trace);
  result.povm.n_max = n_max;
  result.povm.dim = dim;
  result.povm.method = "ml";
  result.povm.p = fit.table.topLeftCorner(n_max + 1, dim);
  result.povm.overflow = fit.table.row(n_max + 1).head(dim).transpose();
  result.povm.err = Eigen::MatrixXd::Zero(n_max + 1, dim);
  result.povm.overflow_err = Eigen::VectorXd::Zero(dim);

  if (config.bootstrap == 0) return result;

  const std::size_t n = records.size();
  const std::size_t resamples = config.bootstrap;
  rng::Stream stream(config.seed, "calibration-bootstrap");
  std::vector<std::optional<Eigen::MatrixXd>> fits(resamples);
  parallel::for_chunks(
      resamples, config.jobs,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
          MlTable sub;
          sub.rows = rows;
          sub.dim = model_dim;
          sub.wq.resize(static_cast<Eigen::Index>(n), model_dim);
          sub.bin.resize(n);
          for (std::size_t j = 0; j < n; ++j) {
            const auto pick = std::min<std::size_t>(
                n - 1, static_cast<std::size_t>(stream.uniform(j, r) *
                                                static_cast<double>(n)));
            sub.wq.row(static_cast<Eigen::Index>(j)) =
                t.wq.row(static_cast<Eigen::Index>(pick));
            sub.bin[j] = t.bin[pick];
          }
          EmFit refit = run_povm_em(sub, fit.table, dim, config.max_iters,
                                    config.tol, 1, false);
          if (refit.converged) fits[r] = std::move(refit.table);
        }
      });

  std::size_t used = 0;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(rows, model_dim);
  for (const auto& f : fits) {
    if (f) {
      mean += *f;
      ++used;
    }
  }
  if (used * 2 < resamples) {
    throw NumericalError("calibrate_ml: " + std::to_string(resamples - used) +
                         " of " + std::to_string(resamples) +
                         " bootstrap fits failed to converge");
  }
  mean /= static_cast<double>(used);
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(rows, model_dim);
  for (const auto& f : fits) {
    if (f) var += (*f - mean).cwiseAbs2();
  }
  const Eigen::MatrixXd std_err =
      (var / static_cast<double>(used - 1)).cwiseSqrt();
  result.povm.err = std_err.topLeftCorner(n_max + 1, dim);
  result.povm.overflow_err = std_err.row(n_max + 1).head(dim).transpose();
  return result;
}

}  // namespace homtom
