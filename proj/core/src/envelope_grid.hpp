#pragma once

// Proposal distribution for exact rejection sampling of smooth 1d densities.
// A piecewise-constant envelope is built over a uniform grid from node
// values of a pointwise upper bound; segments are drawn by exact inversion
// of the (piecewise-linear) envelope CDF.  The caller then accepts against
// the exact target density, so the grid resolution only affects acceptance
// rate, never the sampled distribution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "homtom/errors.hpp"

namespace homtom {
namespace detail {

class EnvelopeGrid {
 public:
  // bound_values[i] >= sup over segment neighborhood of the target density
  // at node x = xmin + i*dx is not required; a 2% headroom over the node
  // maxima covers the within-segment variation of the smooth targets here.
  void build(double xmin, double dx, const std::vector<double>& bound_values) {
    xmin_ = xmin;
    dx_ = dx;
    const std::size_t nseg = bound_values.size() - 1;
    env_.resize(nseg);
    cdf_.resize(nseg);
    double acc = 0.0;
    for (std::size_t s = 0; s < nseg; ++s) {
      env_[s] = 1.02 * std::max(bound_values[s], bound_values[s + 1]) + 1e-300;
      acc += env_[s] * dx_;
      cdf_[s] = acc;
    }
    total_ = acc;
  }

  double total_mass() const { return total_; }

  // maps one uniform in [0,1) to a proposal point and its envelope height
  void propose(double u, double* x, double* height) const {
    const double target = u * total_;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    std::size_t s = static_cast<std::size_t>(it - cdf_.begin());
    if (s >= env_.size()) s = env_.size() - 1;
    const double lo = s == 0 ? 0.0 : cdf_[s - 1];
    const double frac = std::clamp((target - lo) / (env_[s] * dx_), 0.0, 1.0);
    *x = xmin_ + (static_cast<double>(s) + frac) * dx_;
    *height = env_[s];
  }

 private:
  double xmin_ = 0.0, dx_ = 0.0, total_ = 0.0;
  std::vector<double> env_, cdf_;
};

}  // namespace detail
}  // namespace homtom
