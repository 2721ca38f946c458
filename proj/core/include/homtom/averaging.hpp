#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>

#include "homtom/states.hpp"

namespace homtom {

// Streaming mean/variance accumulator (Welford update, Chan merge).  Partial
// accumulators merged in a fixed order give the same result for any number
// of worker threads.
struct RunningMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  void merge(const RunningMoments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double d = o.mean - mean;
    const double total = static_cast<double>(n + o.n);
    mean += d * static_cast<double>(o.n) / total;
    m2 += o.m2 + d * d * static_cast<double>(n) *
                     static_cast<double>(o.n) / total;
    n += o.n;
  }

  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double std_error() const {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
};

struct Diagnostics {
  double chi2_pvalue = std::numeric_limits<double>::quiet_NaN();
  int block_count = 0;
};

struct EstimateWithError {
  std::complex<double> mean{0.0, 0.0};
  double err_re = 0.0;  // standard error of the real part
  double err_im = 0.0;
  std::size_t count = 0;
  Diagnostics diagnostics;

  double std_error() const { return std::hypot(err_re, err_im); }
};

using KernelFn = std::function<std::complex<double>(double x, double phi)>;

// Sample mean and standard error of a kernel over measured events, with a
// blocked chi-square normality diagnostic on the real part.
EstimateWithError estimate_expectation(std::span<const QuadratureSample> samples,
                                       const KernelFn& fn, unsigned jobs = 1);

struct ReconstructOptions {
  bool hermitize = false;
  bool clip_eigenvalues = false;
  unsigned jobs = 1;
};

struct DensityMatrixEstimate {
  Eigen::MatrixXcd rho;
  Eigen::MatrixXd err;  // per-element scalar standard error
  double eta = 1.0;
  std::size_t sample_count = 0;
  bool hermitized = false;
  bool clipped = false;
  Diagnostics diagnostics;  // from the rho_00 kernel stream
};

// Pattern-function tomography: every element of rho up to dim is the sample
// mean of its kernel.  Requires eta > 1/2 and at least 100 samples.
DensityMatrixEstimate reconstruct_density_matrix(
    std::span<const QuadratureSample> samples, int dim, double eta,
    const ReconstructOptions& options = {});

// Optional post-processing steps.
void hermitize(DensityMatrixEstimate& estimate);
void clip_negative_eigenvalues(DensityMatrixEstimate& estimate);

// Chi-square test of block-mean normality.  Values are split into `blocks`
// consecutive blocks; block means are binned into equal-probability cells
// of the fitted Gaussian.  Returns the p-value.
double chi2_normality_check(std::span<const double> values, int blocks);

// Same binning applied to raw values (no central-limit blocking); useful to
// see the non-Gaussian shape of raw kernel evaluations.
double chi2_normality_raw(std::span<const double> values);

// Standard error of the kernel mean by bootstrap resampling; returns the
// root-sum-square over real and imaginary parts.
double bootstrap_std(std::span<const QuadratureSample> samples,
                     const KernelFn& fn, int resamples, std::uint64_t seed);

}  // namespace homtom
