#include "homtom/maxlik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include <Eigen/Eigenvalues>

#include "homtom/errors.hpp"
#include "homtom/kernels.hpp"
#include "homtom/parallel.hpp"
#include "homtom/rng.hpp"

namespace homtom {
namespace {

using complex = std::complex<double>;

constexpr double kDensityFloor = 1e-300;
// eigendirections below this weight sit on the positivity boundary where
// the stationarity condition becomes an inequality, so they are excluded
// from the residual
constexpr double kSupportCut = 1e-7;

// per-sample measurement data: the eta-smeared Fock products packed as the
// upper triangle (column per sample) plus the local oscillator phase
struct SampleTable {
  int dim = 0;
  Eigen::MatrixXd q;
  std::vector<double> phi;

  std::size_t count() const { return phi.size(); }
};

SampleTable build_table(std::span<const QuadratureSample> samples, int dim,
                        double eta, unsigned jobs) {
  SampleTable t;
  t.dim = dim;
  const int npairs = dim * (dim + 1) / 2;
  t.q.resize(npairs, static_cast<Eigen::Index>(samples.size()));
  t.phi.resize(samples.size());
  const SmearedProductTable table(dim - 1, eta);
  parallel::for_chunks(
      samples.size(), jobs,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        Eigen::MatrixXd work;
        for (std::size_t i = begin; i < end; ++i) {
          table.evaluate(samples[i].x, work);
          t.phi[i] = samples[i].phi;
          const auto col = static_cast<Eigen::Index>(i);
          int idx = 0;
          for (int b = 0; b < dim; ++b) {
            for (int a = 0; a <= b; ++a) t.q(idx++, col) = work(a, b);
          }
        }
      });
  return t;
}

// density of one sample under rho; the phase ladder w[k] = e^{i k phi} must
// have length dim
double sample_density(const SampleTable& t, const Eigen::MatrixXcd& rho,
                      const std::vector<complex>& w, Eigen::Index i) {
  double p = 0.0;
  int idx = 0;
  for (int b = 0; b < t.dim; ++b) {
    for (int a = 0; a < b; ++a) {
      p += 2.0 * (rho(a, b) * w[static_cast<std::size_t>(b - a)]).real() *
           t.q(idx++, i);
    }
    p += rho(b, b).real() * t.q(idx++, i);
  }
  return p;
}

void phase_ladder(double phi, int dim, std::vector<complex>& w) {
  w.resize(static_cast<std::size_t>(dim));
  const complex z = std::polar(1.0, phi);
  w[0] = 1.0;
  for (int k = 1; k < dim; ++k) {
    w[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(k - 1)] * z;
  }
}

double loglik_pass(const SampleTable& t, const Eigen::MatrixXcd& rho,
                   unsigned jobs) {
  return parallel::map_reduce<double>(
      t.count(), jobs,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        double sum = 0.0;
        std::vector<complex> w;
        for (std::size_t i = begin; i < end; ++i) {
          const auto col = static_cast<Eigen::Index>(i);
          phase_ladder(t.phi[i], t.dim, w);
          sum += std::log(std::max(sample_density(t, rho, w, col),
                                   kDensityFloor));
        }
        return sum;
      },
      0.0, [](double a, double b) { return a + b; });
}

struct PassResult {
  Eigen::MatrixXcd response;  // (1/N) sum_i Pi_i / p_i, Hermitian
  double loglik = 0.0;
};

PassResult response_pass(const SampleTable& t, const Eigen::MatrixXcd& rho,
                         unsigned jobs) {
  const int d = t.dim;
  struct Partial {
    Eigen::MatrixXcd s;
    double loglik;
  };
  Partial total = parallel::map_reduce<Partial>(
      t.count(), jobs,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        Partial part{Eigen::MatrixXcd::Zero(d, d), 0.0};
        std::vector<complex> w;
        for (std::size_t i = begin; i < end; ++i) {
          const auto col = static_cast<Eigen::Index>(i);
          phase_ladder(t.phi[i], d, w);
          const double p = sample_density(t, rho, w, col);
          part.loglik += std::log(std::max(p, kDensityFloor));
          if (p < 1e-250) continue;
          int idx = 0;
          for (int b = 0; b < d; ++b) {
            for (int a = 0; a < b; ++a) {
              part.s(a, b) += std::conj(w[static_cast<std::size_t>(b - a)]) *
                              (t.q(idx++, col) / p);
            }
            part.s(b, b) += t.q(idx++, col) / p;
          }
        }
        return part;
      },
      Partial{Eigen::MatrixXcd::Zero(d, d), 0.0},
      [](Partial acc, Partial part) {
        acc.s += part.s;
        acc.loglik += part.loglik;
        return acc;
      });

  PassResult out;
  out.loglik = total.loglik;
  out.response = std::move(total.s);
  out.response /= static_cast<double>(t.count());
  for (int b = 0; b < d; ++b) {
    for (int a = 0; a < b; ++a) out.response(b, a) = std::conj(out.response(a, b));
  }
  return out;
}

Eigen::MatrixXcd hermitize_normalize(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd h = 0.5 * (m + Eigen::MatrixXcd(m.adjoint()));
  const double tr = h.trace().real();
  if (!(tr > 0.0) || !h.allFinite()) {
    throw NumericalError("ml_reconstruct: update lost positivity");
  }
  return h / tr;
}

// clip to the positive cone and renormalize; empty result signals failure
Eigen::MatrixXcd psd_project(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd h = 0.5 * (m + Eigen::MatrixXcd(m.adjoint()));
  if (!h.allFinite()) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) return {};
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  const double tr = ev.sum();
  if (!(tr > 0.0)) return {};
  return es.eigenvectors() * (ev / tr).asDiagonal() *
         es.eigenvectors().adjoint();
}

double stationarity_residual(const Eigen::MatrixXcd& rho,
                             const Eigen::MatrixXcd& response) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    if (es.eigenvalues()[k] <= kSupportCut) continue;
    const Eigen::VectorXcd v = es.eigenvectors().col(k);
    const complex val = v.dot(response * v);
    worst = std::max(worst, std::abs(val - 1.0));
  }
  return worst;
}

struct IterState {
  Eigen::MatrixXcd rho;
  double loglik = 0.0;
  Eigen::MatrixXcd response;
};

// multiplicative update rho -> M rho M / tr with M = (1-lam) + lam R,
// backing off lam until the likelihood does not decrease; returns the input
// state unchanged if every backoff fails
IterState em_step(const SampleTable& t, const IterState& cur, unsigned jobs) {
  const int d = t.dim;
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(d, d);
  double lam = 1.0;
  for (int attempt = 0; attempt < 24; ++attempt) {
    const Eigen::MatrixXcd m = lam * cur.response + (1.0 - lam) * eye;
    Eigen::MatrixXcd cand = hermitize_normalize(m * cur.rho * m);
    PassResult pr = response_pass(t, cand, jobs);
    if (pr.loglik >= cur.loglik - 1e-12 * (1.0 + std::abs(cur.loglik))) {
      return {std::move(cand), pr.loglik, std::move(pr.response)};
    }
    lam *= 0.5;
  }
  return cur;
}

// convergence bookkeeping shared by the backends: the run stops once the
// relative improvement stayed below an (internally tightened) tolerance for
// 5 successive updates and the stationarity residual meets 10 * tol
struct StopRule {
  double tol;
  double target;  // 10 * configured tol
  int streak = 0;

  explicit StopRule(double t) : tol(t), target(10.0 * t) {}

  void record(double before, double after) {
    const double rel = std::abs(after - before) / (1.0 + std::abs(after));
    if (rel < tol) {
      ++streak;
    } else {
      streak = 0;
    }
  }

  bool should_check() const { return streak >= 5; }

  bool accept_or_tighten(double residual) {
    if (residual <= target) return true;
    tol *= 0.1;
    streak = 0;
    return false;
  }
};

void run_em(const SampleTable& t, const MlConfig& cfg, Eigen::MatrixXcd rho,
            MlReport& report, Eigen::MatrixXcd& out) {
  PassResult pr = response_pass(t, rho, cfg.jobs);
  IterState cur{std::move(rho), pr.loglik, std::move(pr.response)};
  report.loglik_trace.push_back(cur.loglik);
  StopRule stop(cfg.tol);
  std::size_t iters = 0;
  bool converged = false;

  while (iters < cfg.max_iters) {
    const double before = cur.loglik;
    if (cfg.accelerate && cfg.max_iters - iters >= 3) {
      IterState s1 = em_step(t, cur, cfg.jobs);
      IterState s2 = em_step(t, s1, cfg.jobs);
      iters += 2;
      IterState next = s2;
      const Eigen::MatrixXcd r = s1.rho - cur.rho;
      const Eigen::MatrixXcd v = s2.rho - 2.0 * s1.rho + cur.rho;
      const double vn = v.norm();
      if (vn > 1e-14) {
        // extrapolate along the secant of the two updates, never shorter
        // than a plain step, then stabilize with one more update
        const double alpha = -std::max(1.0, r.norm() / vn);
        Eigen::MatrixXcd cand =
            psd_project(cur.rho - 2.0 * alpha * r + alpha * alpha * v);
        if (cand.size() != 0) {
          PassResult pc = response_pass(t, cand, cfg.jobs);
          IterState sc{std::move(cand), pc.loglik, std::move(pc.response)};
          IterState s3 = em_step(t, sc, cfg.jobs);
          ++iters;
          if (s3.loglik >= s2.loglik) next = std::move(s3);
        }
      }
      cur = std::move(next);
    } else {
      cur = em_step(t, cur, cfg.jobs);
      ++iters;
    }
    report.loglik_trace.push_back(cur.loglik);
    stop.record(before, cur.loglik);
    if (stop.should_check()) {
      const double res = stationarity_residual(cur.rho, cur.response);
      if (stop.accept_or_tighten(res)) {
        report.stationarity_residual = res;
        converged = true;
        break;
      }
    }
  }

  if (!converged) {
    report.stationarity_residual =
        stationarity_residual(cur.rho, cur.response);
  }
  report.converged = converged;
  report.iterations = iters;
  report.loglik = cur.loglik;
  out = std::move(cur.rho);
}

// parameter packing for the simplex backend: d real diagonal entries
// followed by the strictly upper entries as (re, im) pairs.  The diagonal
// may go negative during the search; rho(T) stays valid regardless.
void unpack_factor(const Eigen::VectorXd& theta, Eigen::MatrixXcd& t) {
  const int d = static_cast<int>(t.rows());
  int k = 0;
  t.setZero();
  for (int a = 0; a < d; ++a) {
    t(a, a) = theta[k++];
    for (int b = a + 1; b < d; ++b) {
      t(a, b) = complex(theta[k], theta[k + 1]);
      k += 2;
    }
  }
}

Eigen::VectorXd pack_factor(const Eigen::MatrixXcd& t) {
  const int d = static_cast<int>(t.rows());
  Eigen::VectorXd theta(d * d);
  int k = 0;
  for (int a = 0; a < d; ++a) {
    theta[k++] = t(a, a).real();
    for (int b = a + 1; b < d; ++b) {
      theta[k++] = t(a, b).real();
      theta[k++] = t(a, b).imag();
    }
  }
  return theta;
}

Eigen::MatrixXcd factor_density(const Eigen::MatrixXcd& t) {
  Eigen::MatrixXcd rho = t.adjoint() * t;
  const double tr = rho.trace().real();
  if (!(tr > 0.0)) return Eigen::MatrixXcd::Identity(t.rows(), t.cols()) /
                           static_cast<double>(t.rows());
  return rho / tr;
}

void run_simplex(const SampleTable& t, const MlConfig& cfg,
                 const Eigen::MatrixXcd& rho0, MlReport& report,
                 Eigen::MatrixXcd& out) {
  const int d = t.dim;
  const int n = d * d;
  Eigen::MatrixXcd work(d, d);
  const auto objective = [&](const Eigen::VectorXd& theta) {
    unpack_factor(theta, work);
    return -loglik_pass(t, factor_density(work), cfg.jobs);
  };

  const Eigen::VectorXd theta0 = pack_factor(CholeskyFactor::from_density(rho0).t);
  rng::Stream stream(cfg.seed, "simplex-init");
  std::vector<Eigen::VectorXd> verts(static_cast<std::size_t>(n) + 1, theta0);
  std::vector<double> fv(static_cast<std::size_t>(n) + 1);
  for (int j = 1; j <= n; ++j) {
    const double scale = 0.1 * (1.0 + std::abs(theta0[j - 1]));
    verts[static_cast<std::size_t>(j)][j - 1] +=
        scale * (0.5 + stream.uniform(static_cast<std::uint64_t>(j), 0));
  }
  for (std::size_t j = 0; j < verts.size(); ++j) fv[j] = objective(verts[j]);

  std::vector<std::size_t> order(verts.size());
  StopRule stop(cfg.tol);
  std::size_t iters = 0;
  bool converged = false;
  double best_prev = *std::min_element(fv.begin(), fv.end());
  report.loglik_trace.push_back(-best_prev);

  while (iters < cfg.max_iters) {
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t lo = order.front(), hi = order.back();
    const std::size_t second = order[order.size() - 2];

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < order.size(); ++j) {
      if (order[j] != hi) centroid += verts[order[j]];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd refl = centroid + (centroid - verts[hi]);
    const double frefl = objective(refl);
    if (frefl < fv[lo]) {
      const Eigen::VectorXd expa = centroid + 2.0 * (centroid - verts[hi]);
      const double fexpa = objective(expa);
      if (fexpa < frefl) {
        verts[hi] = expa;
        fv[hi] = fexpa;
      } else {
        verts[hi] = refl;
        fv[hi] = frefl;
      }
    } else if (frefl < fv[second]) {
      verts[hi] = refl;
      fv[hi] = frefl;
    } else {
      const Eigen::VectorXd contr =
          centroid + 0.5 * ((frefl < fv[hi] ? refl : verts[hi]) - centroid);
      const double fcontr = objective(contr);
      if (fcontr < std::min(frefl, fv[hi])) {
        verts[hi] = contr;
        fv[hi] = fcontr;
      } else {
        for (std::size_t j = 0; j < verts.size(); ++j) {
          if (j == lo) continue;
          verts[j] = verts[lo] + 0.5 * (verts[j] - verts[lo]);
          fv[j] = objective(verts[j]);
        }
      }
    }
    ++iters;

    const double best = *std::min_element(fv.begin(), fv.end());
    report.loglik_trace.push_back(-best);
    stop.record(-best_prev, -best);
    best_prev = best;
    if (stop.should_check()) {
      const std::size_t ib = static_cast<std::size_t>(
          std::min_element(fv.begin(), fv.end()) - fv.begin());
      unpack_factor(verts[ib], work);
      const Eigen::MatrixXcd rho = factor_density(work);
      const double res =
          stationarity_residual(rho, response_pass(t, rho, cfg.jobs).response);
      if (stop.accept_or_tighten(res)) {
        report.stationarity_residual = res;
        converged = true;
        break;
      }
    }
  }

  const std::size_t ib = static_cast<std::size_t>(
      std::min_element(fv.begin(), fv.end()) - fv.begin());
  unpack_factor(verts[ib], work);
  out = factor_density(work);
  report.loglik = -fv[ib];
  report.iterations = iters;
  report.converged = converged;
  if (!converged) {
    report.stationarity_residual =
        stationarity_residual(out, response_pass(t, out, cfg.jobs).response);
  }
}

// zero the lower triangle and rotate each row phase so the diagonal is
// real nonnegative (a left diagonal unitary, which leaves rho unchanged)
void project_factor(Eigen::MatrixXcd& t) {
  const int d = static_cast<int>(t.rows());
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < a; ++b) t(a, b) = 0.0;
    const double mag = std::abs(t(a, a));
    if (mag > 0.0) {
      const complex phase = std::conj(t(a, a)) / mag;
      t.row(a) *= phase;
      t(a, a) = mag;
    }
  }
}

void run_gradient(const SampleTable& t, const MlConfig& cfg,
                  const Eigen::MatrixXcd& rho0, MlReport& report,
                  Eigen::MatrixXcd& out) {
  const int d = t.dim;
  const double n = static_cast<double>(t.count());
  Eigen::MatrixXcd factor = CholeskyFactor::from_density(rho0).t;
  project_factor(factor);
  Eigen::MatrixXcd rho = factor_density(factor);
  PassResult pr = response_pass(t, rho, cfg.jobs);
  double loglik = pr.loglik;
  report.loglik_trace.push_back(loglik);

  StopRule stop(cfg.tol);
  std::size_t iters = 0;
  bool converged = false;
  double step = 0.5;

  while (iters < cfg.max_iters) {
    const double tau = (factor.adjoint() * factor).trace().real();
    const Eigen::MatrixXcd grad =
        (n / tau) * factor *
        (pr.response - Eigen::MatrixXcd::Identity(d, d));
    const double before = loglik;

    double s = step;
    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      Eigen::MatrixXcd cand = factor + s * grad;
      project_factor(cand);
      const Eigen::MatrixXcd rho_cand = factor_density(cand);
      const double cand_ll = loglik_pass(t, rho_cand, cfg.jobs);
      if (cand_ll >= loglik - 1e-12 * (1.0 + std::abs(loglik))) {
        factor = std::move(cand);
        rho = rho_cand;
        pr = response_pass(t, rho, cfg.jobs);
        loglik = pr.loglik;
        step = (tries == 0) ? std::min(s * 1.5, 64.0) : s;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    ++iters;
    report.loglik_trace.push_back(loglik);
    stop.record(before, loglik);
    if (!accepted && !stop.should_check()) {
      // fully stalled line search: force the residual check path
      stop.streak = 5;
    }
    if (stop.should_check()) {
      const double res = stationarity_residual(rho, pr.response);
      if (stop.accept_or_tighten(res)) {
        report.stationarity_residual = res;
        converged = true;
        break;
      }
      if (!accepted) break;  // cannot make further progress
    }
  }

  if (!converged) {
    report.stationarity_residual = stationarity_residual(rho, pr.response);
  }
  report.converged = converged;
  report.iterations = iters;
  report.loglik = loglik;
  out = std::move(rho);
}

int auto_truncation(std::span<const QuadratureSample> samples, double eta,
                    unsigned jobs) {
  const int cap = static_cast<int>(std::sqrt(static_cast<double>(samples.size())));
  const int dmax = std::clamp(cap, 1, 16);
  const KernelBank bank(dmax, eta);
  Eigen::VectorXd diag_mean = parallel::map_reduce<Eigen::VectorXd>(
      samples.size(), jobs,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(dmax);
        Eigen::VectorXd work;
        for (std::size_t i = begin; i < end; ++i) {
          bank.evaluate_diagonal(samples[i].x, work);
          acc += work;
        }
        return acc;
      },
      Eigen::VectorXd::Zero(dmax),
      [](Eigen::VectorXd acc, const Eigen::VectorXd& part) {
        acc += part;
        return acc;
      });
  diag_mean /= static_cast<double>(samples.size());

  double mass = 0.0;
  for (int k = 0; k < dmax; ++k) {
    mass += std::clamp(diag_mean[k], 0.0, 1.0);
    if (mass >= 0.999) return k + 1;
  }
  return dmax;
}

Eigen::MatrixXcd resolve_initial(const MlConfig& cfg, int dim) {
  const Eigen::MatrixXcd mixed =
      Eigen::MatrixXcd::Identity(dim, dim) / static_cast<double>(dim);
  if (cfg.initial.size() == 0) return mixed;
  if (cfg.initial.rows() != dim || cfg.initial.cols() != dim) {
    throw DomainError("ml_reconstruct: initial density has dimension " +
                      std::to_string(cfg.initial.rows()) + ", expected " +
                      std::to_string(dim));
  }
  Eigen::MatrixXcd rho = psd_project(cfg.initial);
  if (rho.size() == 0) {
    throw DomainError("ml_reconstruct: initial density is not positive");
  }
  // keep a sliver of the maximally mixed state so multiplicative updates
  // can regrow directions the start left empty
  return 0.999999 * rho + 1e-6 * mixed;
}

}  // namespace

CholeskyFactor CholeskyFactor::identity(int dim) {
  if (dim < 1) throw DomainError("CholeskyFactor: dimension must be >= 1");
  CholeskyFactor f;
  f.t = Eigen::MatrixXcd::Identity(dim, dim) / std::sqrt(static_cast<double>(dim));
  return f;
}

CholeskyFactor CholeskyFactor::random(int dim, std::uint64_t seed) {
  if (dim < 1) throw DomainError("CholeskyFactor: dimension must be >= 1");
  rng::Stream stream(seed, "cholesky-random");
  CholeskyFactor f;
  f.t = Eigen::MatrixXcd::Zero(dim, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int a = 0; a < dim; ++a) {
    const auto idx = static_cast<std::uint64_t>(a * dim + a);
    f.t(a, a) = scale * std::abs(stream.normal(idx, 0));
    for (int b = a + 1; b < dim; ++b) {
      const auto j = static_cast<std::uint64_t>(a * dim + b);
      f.t(a, b) =
          0.5 * scale * complex(stream.normal(j, 0), stream.normal(j, 1));
    }
  }
  return f;
}

CholeskyFactor CholeskyFactor::from_density(const Eigen::MatrixXcd& rho) {
  if (rho.rows() != rho.cols() || rho.rows() < 1) {
    throw DomainError("CholeskyFactor: density matrix must be square");
  }
  const Eigen::MatrixXcd herm = 0.5 * (rho + Eigen::MatrixXcd(rho.adjoint()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
  if (es.info() != Eigen::Success) {
    throw NumericalError("CholeskyFactor: eigendecomposition failed");
  }
  const double floor = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  const Eigen::MatrixXcd psd =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  Eigen::LLT<Eigen::MatrixXcd> llt(psd);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("CholeskyFactor: factorization failed");
  }
  CholeskyFactor f;
  f.t = llt.matrixL().adjoint();
  return f;
}

Eigen::MatrixXcd CholeskyFactor::density() const {
  if (t.rows() != t.cols() || t.rows() < 1) {
    throw DomainError("CholeskyFactor: factor must be square");
  }
  Eigen::MatrixXcd rho = t.adjoint() * t;
  const double tr = rho.trace().real();
  if (!(tr > 0.0)) {
    throw DomainError("CholeskyFactor: factor has zero trace norm");
  }
  rho /= tr;
  return 0.5 * (rho + Eigen::MatrixXcd(rho.adjoint()));
}

double log_likelihood(const CholeskyFactor& factor,
                      std::span<const QuadratureSample> samples, double eta) {
  if (samples.empty()) {
    throw InsufficientData("log_likelihood: no samples");
  }
  if (!(eta > 0.0) || eta > 1.0) {
    throw DomainError("log_likelihood: eta must lie in (0, 1], got " +
                      std::to_string(eta));
  }
  const Eigen::MatrixXcd rho = factor.density();
  const int dim = static_cast<int>(rho.rows());
  const SampleTable table = build_table(samples, dim, eta, 1);
  return loglik_pass(table, rho, 1);
}

MlResult ml_reconstruct(std::span<const QuadratureSample> samples,
                        const MlConfig& config) {
  if (!(config.eta > 0.0) || config.eta > 1.0) {
    throw DomainError("ml_reconstruct: eta must lie in (0, 1], got " +
                      std::to_string(config.eta));
  }
  if (!(config.tol > 0.0)) {
    throw DomainError("ml_reconstruct: tolerance must be positive");
  }
  if (config.max_iters < 1) {
    throw DomainError("ml_reconstruct: max_iters must be >= 1");
  }
  if (config.dim < 0) {
    throw DomainError("ml_reconstruct: dimension must be >= 0");
  }
  if (samples.empty()) {
    throw InsufficientData("ml_reconstruct: no samples");
  }

  int dim = config.dim;
  if (dim == 0) {
    if (config.eta <= 0.5) {
      throw DomainError(
          "ml_reconstruct: automatic truncation uses an averaging pre-pass "
          "that requires eta > 0.5; set dim explicitly");
    }
    dim = auto_truncation(samples, config.eta, config.jobs);
  }
  if (samples.size() < static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim)) {
    throw InsufficientData("ml_reconstruct: need at least dim^2 = " +
                           std::to_string(dim * dim) + " samples, got " +
                           std::to_string(samples.size()));
  }

  const SampleTable table = build_table(samples, dim, config.eta, config.jobs);
  const Eigen::MatrixXcd rho0 = resolve_initial(config, dim);

  MlResult result;
  result.report.truncation = dim;
  Eigen::MatrixXcd rho;
  switch (config.optimizer) {
    case MlOptimizer::expectation_maximization:
      run_em(table, config, rho0, result.report, rho);
      break;
    case MlOptimizer::downhill_simplex:
      run_simplex(table, config, rho0, result.report, rho);
      break;
    case MlOptimizer::projected_gradient:
      run_gradient(table, config, rho0, result.report, rho);
      break;
  }

  result.estimate.rho = std::move(rho);
  result.estimate.err = Eigen::MatrixXd::Zero(dim, dim);
  result.estimate.eta = config.eta;
  result.estimate.sample_count = samples.size();
  return result;
}

double fisher_information(
    const std::function<double(double, double)>& pdf_family, double gamma,
    std::span<const double> grid) {
  if (!pdf_family) {
    throw DomainError("fisher_information: missing density family");
  }
  if (grid.size() < 3) {
    throw DomainError("fisher_information: grid needs at least 3 points");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw DomainError("fisher_information: grid must increase strictly");
    }
  }

  const double h =
      std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + std::abs(gamma));
  double fisher = 0.0;
  double total_mass = 0.0;
  double skipped_mass = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double w;
    if (i == 0) {
      w = 0.5 * (grid[1] - grid[0]);
    } else if (i + 1 == grid.size()) {
      w = 0.5 * (grid[i] - grid[i - 1]);
    } else {
      w = 0.5 * (grid[i + 1] - grid[i - 1]);
    }
    const double p = pdf_family(gamma, grid[i]);
    total_mass += w * std::max(p, 0.0);
    if (p < 1e-14) {
      skipped_mass += w * std::max(p, 0.0);
      continue;
    }
    const double dp =
        (pdf_family(gamma + h, grid[i]) - pdf_family(gamma - h, grid[i])) /
        (2.0 * h);
    fisher += w * dp * dp / p;
  }
  if (!(total_mass > 0.0) || skipped_mass > 0.01 * total_mass) {
    throw NumericalError(
        "fisher_information: density mass is missing from the grid");
  }
  return fisher;
}

MlBootstrapResult ml_bootstrap(std::span<const QuadratureSample> samples,
                               const MlConfig& config, std::size_t resamples,
                               std::uint64_t seed) {
  if (resamples < 20) {
    throw DomainError("ml_bootstrap: need at least 20 resamples, got " +
                      std::to_string(resamples));
  }
  MlResult full = ml_reconstruct(samples, config);
  const int dim = static_cast<int>(full.estimate.rho.rows());

  MlConfig sub = config;
  sub.dim = dim;
  sub.initial = full.estimate.rho;
  sub.jobs = 1;

  const std::size_t n = samples.size();
  rng::Stream stream(seed, "ml-bootstrap");
  std::vector<std::optional<Eigen::MatrixXcd>> fits(resamples);
  parallel::for_chunks(
      resamples, config.jobs,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<QuadratureSample> redraw(n);
        for (std::size_t r = begin; r < end; ++r) {
          for (std::size_t j = 0; j < n; ++j) {
            const auto pick = std::min<std::size_t>(
                n - 1, static_cast<std::size_t>(stream.uniform(j, r) *
                                                static_cast<double>(n)));
            redraw[j] = samples[pick];
          }
          MlResult res = ml_reconstruct(redraw, sub);
          if (res.report.converged) fits[r] = std::move(res.estimate.rho);
        }
      });

  std::size_t used = 0;
  Eigen::MatrixXcd mean = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& fit : fits) {
    if (fit) {
      mean += *fit;
      ++used;
    }
  }
  if (used * 2 < resamples) {
    throw NumericalError("ml_bootstrap: " +
                         std::to_string(resamples - used) + " of " +
                         std::to_string(resamples) +
                         " resample fits failed to converge");
  }
  mean /= static_cast<double>(used);

  Eigen::MatrixXd var_re = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd var_im = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& fit : fits) {
    if (!fit) continue;
    const Eigen::MatrixXcd diff = *fit - mean;
    var_re += diff.real().cwiseAbs2();
    var_im += diff.imag().cwiseAbs2();
  }
  const double ddof = static_cast<double>(used - 1);
  MlBootstrapResult out;
  out.std_err = ((var_re + var_im) / ddof).cwiseSqrt();
  out.used = used;
  out.excluded = resamples - used;
  return out;
}

}  // namespace homtom
