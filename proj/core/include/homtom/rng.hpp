#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace homtom {

// Counter-based random number generation.  Every draw is a pure function of
// (seed, stream label, sample index, slot), so the value of sample i never
// depends on how many threads produced samples 0..i-1.  This is what makes
// output files bitwise reproducible under any --jobs setting.
namespace rng {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over the label keeps independent streams (sampler, bootstrap,
// optimizer starts, ...) decorrelated even under the same user seed.
constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::string_view label)
      : base_(splitmix64(seed ^ hash_label(label))) {}

  std::uint64_t bits(std::uint64_t index, std::uint64_t slot) const {
    std::uint64_t x = base_;
    x = splitmix64(x ^ (index * 0xd1342543de82ef95ULL));
    x = splitmix64(x ^ (slot * 0xaf251af3b0f025b5ULL));
    return x;
  }

  // uniform in [0, 1) with 53 significant bits
  double uniform(std::uint64_t index, std::uint64_t slot) const {
    return static_cast<double>(bits(index, slot) >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; consumes slots 2*slot and 2*slot+1
  double normal(std::uint64_t index, std::uint64_t slot) const {
    double u1 = uniform(index, 2 * slot);
    double u2 = uniform(index, 2 * slot + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t base_;
};

}  // namespace rng
}  // namespace homtom
