#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace kinvid {

/// Seedable generator shared by every randomized stage (negative pairs, ICA init, synthetic data).
///
/// The bit stream is std::mt19937_64 with the given seed. Derived draws avoid the
/// implementation-defined std distributions so results reproduce across standard libraries:
///   uniform()      = (next() >> 11) * 2^-53
///   index(n)       = next() % n, rejecting draws >= 2^64 - (2^64 mod n)
///   normal()       = Box-Muller on two uniform() draws, cosine branch only
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = n ? std::numeric_limits<std::uint64_t>::max() -
                                        (std::numeric_limits<std::uint64_t>::max() % n + 1) % n
                                  : 0;
    std::uint64_t r;
    do {
      r = next();
    } while (r > limit);
    return r % n;
  }

  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kinvid
