#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ramtsf/errors.hpp"

namespace ramtsf {

// Deterministic splitmix64 generator with hand-rolled distributions.
// Standard-library distributions are implementation-defined, which would break
// the bitwise reproducibility contract for seeded runs, so everything the
// library samples goes through this class.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n).
  int64_t below(int64_t n) {
    if (n <= 0) throw ValueError("Rng::below needs a positive bound");
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = below(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  // Derives an independent stream seed from (seed, salt) pairs.
  static uint64_t mix(uint64_t seed, uint64_t salt) {
    Rng r(seed ^ (0x9E3779B97F4A7C15ULL * (salt + 1)));
    return r.next_u64();
  }

 private:
  uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace ramtsf
