// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mfakf {

/// Deterministic RNG with a hand-rolled Box-Muller gaussian so that fixtures
/// stay byte-identical across standard-library versions.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) {
    double u = (gen_() >> 11) * 0x1.0p-53;  // [0, 1)
    return lo + (hi - lo) * u;
  }

  double gaussian(double mean, double stddev) {
    double u1 = ((gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = (gen_() >> 11) * 0x1.0p-53;
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  std::uint64_t next_u64() { return gen_(); }

private:
  std::mt19937_64 gen_;
};

}  // namespace mfakf
