#include <cmath>
#include <numbers>

#include "envelope_grid.hpp"
#include "homtom/errors.hpp"
#include "homtom/parallel.hpp"
#include "homtom/rng.hpp"
#include "homtom/states.hpp"

namespace homtom {

namespace {

// Uniform slots 0..2 and the per-attempt slots 3+2t are consumed by the
// rejection loop; the additive noise draw lives far away so the two can
// never collide for any realistic attempt count.
constexpr std::uint64_t kNoiseSlot = std::uint64_t{1} << 30;
constexpr int kGridPoints = 4096;
constexpr int kMaxAttempts = 100000;

class QuadratureSampler {
 public:
  QuadratureSampler(const StateModel& state, const DetectorModel& detector)
      : rho_(state.expand().elements()),
        dim_(static_cast<int>(rho_.rows())),
        noise_sd_(std::sqrt(detector.noise_variance())) {
    const double span = std::sqrt(static_cast<double>(dim_)) + 5.0;
    const double dx = 2.0 * span / (kGridPoints - 1);
    // pointwise bound over phases:
    //   M(x) = sum_n rho_nn psi_n^2 + 2 sum_{delta>0} |a_delta(x)|
    std::vector<double> bound(kGridPoints);
    for (int i = 0; i < kGridPoints; ++i) {
      const double x = -span + i * dx;
      const auto psi = fock_wavefunctions(dim_ - 1, x);
      double b = 0.0;
      for (int n = 0; n < dim_; ++n) {
        b += rho_(n, n).real() * psi[n] * psi[n];
      }
      for (int delta = 1; delta < dim_; ++delta) {
        std::complex<double> a = 0.0;
        for (int n = 0; n + delta < dim_; ++n) {
          a += rho_(n, n + delta) * psi[n] * psi[n + delta];
        }
        b += 2.0 * std::abs(a);
      }
      bound[i] = b;
    }
    grid_.build(-span, dx, bound);
  }

  // exact quadrature density of the lossless measurement at phase phi
  double ideal_pdf(double x, double phi) const {
    const auto psi = fock_wavefunctions(dim_ - 1, x);
    double p = 0.0;
    for (int n = 0; n < dim_; ++n) p += rho_(n, n).real() * psi[n] * psi[n];
    for (int delta = 1; delta < dim_; ++delta) {
      const std::complex<double> phase =
          std::polar(1.0, static_cast<double>(delta) * phi);
      std::complex<double> a = 0.0;
      for (int n = 0; n + delta < dim_; ++n) {
        a += rho_(n, n + delta) * psi[n] * psi[n + delta];
      }
      p += 2.0 * (a * phase).real();
    }
    return std::max(p, 0.0);
  }

  double draw_conditional(const rng::Stream& stream, std::uint64_t index,
                          double phi) const {
    for (int t = 0; t < kMaxAttempts; ++t) {
      const std::uint64_t slot = 3 + 2 * static_cast<std::uint64_t>(t);
      double x, height;
      grid_.propose(stream.uniform(index, slot), &x, &height);
      if (stream.uniform(index, slot + 1) * height <= ideal_pdf(x, phi)) {
        return x + noise_sd_ * stream.normal(index, kNoiseSlot);
      }
    }
    throw NumericalError("QuadratureSampler: rejection loop stalled");
  }

  QuadratureSample draw(const rng::Stream& stream, std::uint64_t index) const {
    const double phi = std::numbers::pi * stream.uniform(index, 0);
    return {phi, draw_conditional(stream, index, phi)};
  }

 private:
  Eigen::MatrixXcd rho_;
  int dim_;
  double noise_sd_;
  detail::EnvelopeGrid grid_;
};

}  // namespace

std::vector<QuadratureSample> sample_quadratures(const StateModel& state,
                                                 const DetectorModel& detector,
                                                 std::size_t count,
                                                 std::uint64_t seed,
                                                 unsigned jobs) {
  const QuadratureSampler sampler(state, detector);
  const rng::Stream stream(seed, "quadrature-sampler");
  std::vector<QuadratureSample> out(count);
  parallel::for_chunks(count, jobs,
                       [&](std::size_t, std::size_t b, std::size_t e) {
                         for (std::size_t i = b; i < e; ++i) {
                           out[i] = sampler.draw(stream, i);
                         }
                       });
  return out;
}

std::vector<QuadratureSample> sample_at_phase(const StateModel& state,
                                              const DetectorModel& detector,
                                              double phi, std::size_t count,
                                              std::uint64_t seed,
                                              unsigned jobs) {
  const QuadratureSampler sampler(state, detector);
  const rng::Stream stream(seed, "fixed-phase-sampler");
  std::vector<QuadratureSample> out(count);
  parallel::for_chunks(count, jobs,
                       [&](std::size_t, std::size_t b, std::size_t e) {
                         for (std::size_t i = b; i < e; ++i) {
                           out[i] = {phi,
                                     sampler.draw_conditional(stream, i, phi)};
                         }
                       });
  return out;
}

}  // namespace homtom
