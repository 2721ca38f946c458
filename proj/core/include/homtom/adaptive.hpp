#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <utility>
#include <vector>

#include "homtom/averaging.hpp"

namespace homtom {

// Null function x^power e^{i sign (power + 2 + 2 winding) phi}.  Its
// expectation vanishes for every physical state and detector efficiency:
// the x-moment couples only to coherences with |m - n| <= power of matching
// parity, while the phase winding exceeds power by at least 2, so the phase
// average over [0, pi) kills every term.  Adding any combination to a
// kernel leaves the estimate unbiased but can cancel sampling noise.
struct NullTerm {
  int power;
  int winding;
  int sign;  // +1 or -1
};

std::complex<double> null_value(const NullTerm& term, double x, double phi);

struct NullBasis {
  std::vector<NullTerm> terms;

  // powers 0..4, windings 0..2, both phase signs: 30 functions
  static NullBasis default_basis();
};

struct AdaptReport {
  Eigen::VectorXcd coefficients;
  double variance_before = 0.0;
  double variance_after = 0.0;
  bool split_sample = true;
  std::size_t fit_count = 0;
};

// Least-squares fit of null-function coefficients that minimize the sample
// variance of base + sum_t c_t N_t.  With split_sample the fit uses only
// the first half of the data, so the returned kernel stays strictly
// unbiased on the untouched second half.
std::pair<KernelFn, AdaptReport> adapt(
    std::span<const QuadratureSample> samples, const KernelFn& base,
    const NullBasis& basis, bool split_sample = true);

// Fit on the first half, average on the second (or fit and average on the
// whole set when split_sample is off).
EstimateWithError adaptive_estimate(std::span<const QuadratureSample> samples,
                                    const KernelFn& base,
                                    const NullBasis& basis,
                                    bool split_sample = true,
                                    unsigned jobs = 1);

}  // namespace homtom
