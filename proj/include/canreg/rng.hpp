#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "canreg/errors.hpp"

namespace canreg {

// Stream generator used everywhere randomness is needed. The algorithm is
// SplitMix64 (Steele/Lea/Flood); it is pinned: reports and regression
// fixtures depend on the exact constants below, so they must never change.
//
// A stream is keyed by (seed, replicate, role). Streams are mutually
// independent in the sense that the draws of one stream do not depend on how
// many draws another stream has made, so extending a Monte Carlo run with
// more replicates never perturbs earlier replicates.
class Rng {
 public:
  enum class Role : std::uint64_t {
    generic = 0,
    predictor = 1,
    confounder = 2,
    noise = 3,
    start = 4,
  };

  Rng(std::uint64_t seed, std::uint64_t replicate = 0, Role role = Role::generic) {
    state_ = mix(seed + kGolden);
    state_ = mix(state_ ^ (replicate + kGolden));
    state_ = mix(state_ ^ (static_cast<std::uint64_t>(role) + kGolden));
  }

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  // Uniform on the open interval (0, 1); never returns an exact endpoint.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; consumes two uniforms per draw and keeps
  // no cache, so the draw sequence is a pure function of the stream position.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Exact rejection sampler from the untruncated normal.
  double truncated_normal(double mean, double sd, double lo, double hi) {
    for (std::uint64_t rejects = 0; rejects <= kMaxRejects; ++rejects) {
      const double z = normal(mean, sd);
      if (z >= lo && z <= hi) return z;
    }
    throw NumericalError("truncated_normal: exceeded rejection budget; check truncation bounds");
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kMaxRejects = 1000000;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_ = 0;
};

}  // namespace canreg
