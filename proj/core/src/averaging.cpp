#include "homtom/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "homtom/errors.hpp"
#include "homtom/kernels.hpp"
#include "homtom/parallel.hpp"
#include "homtom/rng.hpp"
#include "homtom/special.hpp"

namespace homtom {

namespace {

double standard_normal_cdf(double t) {
  return 0.5 * std::erfc(-t / std::numbers::sqrt2);
}

// equal-probability binning of values against the Gaussian fitted to them
double gaussian_bin_pvalue(std::span<const double> values) {
  RunningMoments mom;
  for (double v : values) mom.add(v);
  const double sigma = std::sqrt(mom.variance());
  if (!(sigma > 0.0)) {
    throw NumericalError("chi2 normality: degenerate sample variance");
  }
  const std::size_t n = values.size();
  const int nbins = std::max(
      8, static_cast<int>(std::min<std::size_t>(40, n / 10)));
  std::vector<std::size_t> counts(nbins, 0);
  for (double v : values) {
    const double u = standard_normal_cdf((v - mom.mean) / sigma);
    int bin = static_cast<int>(u * nbins);
    bin = std::clamp(bin, 0, nbins - 1);
    ++counts[static_cast<std::size_t>(bin)];
  }
  const double expected = static_cast<double>(n) / nbins;
  double chi2 = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  return chi2_survival(chi2, nbins - 3);
}

Diagnostics block_diagnostics(std::span<const double> values) {
  Diagnostics diag;
  const std::size_t n = values.size();
  if (n < 300) return diag;
  const int blocks =
      static_cast<int>(std::min<std::size_t>(200, n / 30));
  const std::size_t bsize = n / blocks;
  std::vector<double> means(static_cast<std::size_t>(blocks));
  for (int b = 0; b < blocks; ++b) {
    double acc = 0.0;
    const std::size_t lo = static_cast<std::size_t>(b) * bsize;
    for (std::size_t i = lo; i < lo + bsize; ++i) acc += values[i];
    means[static_cast<std::size_t>(b)] = acc / static_cast<double>(bsize);
  }
  diag.block_count = blocks;
  diag.chi2_pvalue = gaussian_bin_pvalue(means);
  return diag;
}

}  // namespace

EstimateWithError estimate_expectation(
    std::span<const QuadratureSample> samples, const KernelFn& fn,
    unsigned jobs) {
  if (samples.empty()) {
    throw InsufficientData("estimate_expectation: no samples");
  }
  struct Partial {
    RunningMoments re, im;
  };
  std::vector<double> re_values(samples.size());
  Partial total = parallel::map_reduce<Partial>(
      samples.size(), jobs,
      [&](std::size_t, std::size_t b, std::size_t e) {
        Partial p;
        for (std::size_t i = b; i < e; ++i) {
          const std::complex<double> v = fn(samples[i].x, samples[i].phi);
          p.re.add(v.real());
          p.im.add(v.imag());
          re_values[i] = v.real();
        }
        return p;
      },
      Partial{},
      [](Partial acc, Partial p) {
        acc.re.merge(p.re);
        acc.im.merge(p.im);
        return acc;
      });

  EstimateWithError est;
  est.mean = {total.re.mean, total.im.mean};
  est.err_re = total.re.std_error();
  est.err_im = total.im.std_error();
  est.count = samples.size();
  est.diagnostics = block_diagnostics(re_values);
  return est;
}

DensityMatrixEstimate reconstruct_density_matrix(
    std::span<const QuadratureSample> samples, int dim, double eta,
    const ReconstructOptions& options) {
  if (dim < 1) {
    throw ValidationError("reconstruct_density_matrix: dimension must be >= 1");
  }
  if (samples.size() < 100) {
    throw InsufficientData(
        "reconstruct_density_matrix: need at least 100 samples, got " +
        std::to_string(samples.size()));
  }
  const KernelBank bank(dim, eta);
  const std::size_t npairs =
      static_cast<std::size_t>(dim) * (dim + 1) / 2;

  struct Partial {
    std::vector<RunningMoments> re, im;
  };
  std::vector<double> k00(samples.size());
  Partial total = parallel::map_reduce<Partial>(
      samples.size(), options.jobs,
      [&](std::size_t, std::size_t b, std::size_t e) {
        Partial p{std::vector<RunningMoments>(npairs),
                  std::vector<RunningMoments>(npairs)};
        Eigen::MatrixXcd k;
        for (std::size_t i = b; i < e; ++i) {
          bank.evaluate(samples[i].x, samples[i].phi, k);
          std::size_t idx = 0;
          for (int n = 0; n < dim; ++n) {
            for (int m = n; m < dim; ++m, ++idx) {
              p.re[idx].add(k(n, m).real());
              p.im[idx].add(k(n, m).imag());
            }
          }
          k00[i] = k(0, 0).real();
        }
        return p;
      },
      Partial{std::vector<RunningMoments>(npairs),
              std::vector<RunningMoments>(npairs)},
      [](Partial acc, Partial p) {
        for (std::size_t i = 0; i < acc.re.size(); ++i) {
          acc.re[i].merge(p.re[i]);
          acc.im[i].merge(p.im[i]);
        }
        return acc;
      });

  DensityMatrixEstimate est;
  est.rho.resize(dim, dim);
  est.err.resize(dim, dim);
  est.eta = eta;
  est.sample_count = samples.size();
  std::size_t idx = 0;
  for (int n = 0; n < dim; ++n) {
    for (int m = n; m < dim; ++m, ++idx) {
      const std::complex<double> v{total.re[idx].mean, total.im[idx].mean};
      est.rho(n, m) = v;
      est.rho(m, n) = std::conj(v);
      const double err =
          std::hypot(total.re[idx].std_error(), total.im[idx].std_error());
      est.err(n, m) = est.err(m, n) = err;
    }
  }
  est.diagnostics = block_diagnostics(k00);

  if (options.hermitize) hermitize(est);
  if (options.clip_eigenvalues) clip_negative_eigenvalues(est);
  return est;
}

void hermitize(DensityMatrixEstimate& estimate) {
  estimate.rho = 0.5 * (estimate.rho + estimate.rho.adjoint().eval());
  estimate.hermitized = true;
}

void clip_negative_eigenvalues(DensityMatrixEstimate& estimate) {
  Eigen::MatrixXcd sym =
      0.5 * (estimate.rho + estimate.rho.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  const double total = ev.sum();
  if (total <= 0.0) {
    throw NumericalError("clip_negative_eigenvalues: nothing positive left");
  }
  ev /= total;
  estimate.rho = es.eigenvectors() * ev.asDiagonal() *
                 es.eigenvectors().adjoint();
  estimate.clipped = true;
  estimate.hermitized = true;
}

double chi2_normality_check(std::span<const double> values, int blocks) {
  if (blocks < 10) {
    throw InsufficientData("chi2_normality_check: need at least 10 blocks");
  }
  const std::size_t bsize = values.size() / static_cast<std::size_t>(blocks);
  if (bsize < 30) {
    throw InsufficientData(
        "chi2_normality_check: need at least 30 values per block");
  }
  std::vector<double> means(static_cast<std::size_t>(blocks));
  for (int b = 0; b < blocks; ++b) {
    double acc = 0.0;
    const std::size_t lo = static_cast<std::size_t>(b) * bsize;
    for (std::size_t i = lo; i < lo + bsize; ++i) acc += values[i];
    means[static_cast<std::size_t>(b)] = acc / static_cast<double>(bsize);
  }
  return gaussian_bin_pvalue(means);
}

double chi2_normality_raw(std::span<const double> values) {
  if (values.size() < 80) {
    throw InsufficientData("chi2_normality_raw: need at least 80 values");
  }
  return gaussian_bin_pvalue(values);
}

double bootstrap_std(std::span<const QuadratureSample> samples,
                     const KernelFn& fn, int resamples, std::uint64_t seed) {
  if (resamples < 20) {
    throw InsufficientData("bootstrap_std: need at least 20 resamples");
  }
  if (samples.empty()) {
    throw InsufficientData("bootstrap_std: no samples");
  }
  const std::size_t n = samples.size();
  std::vector<std::complex<double>> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = fn(samples[i].x, samples[i].phi);
  }
  const rng::Stream stream(seed, "bootstrap");
  RunningMoments re, im;
  for (int r = 0; r < resamples; ++r) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u =
          stream.uniform(static_cast<std::uint64_t>(r), i);
      std::size_t idx = static_cast<std::size_t>(u * static_cast<double>(n));
      if (idx >= n) idx = n - 1;
      acc += values[idx];
    }
    acc /= static_cast<double>(n);
    re.add(acc.real());
    im.add(acc.imag());
  }
  return std::hypot(std::sqrt(re.variance()), std::sqrt(im.variance()));
}

}  // namespace homtom
