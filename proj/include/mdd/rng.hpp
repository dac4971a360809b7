// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mdd {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. The engine is std::mt19937_64 (bit-exact by
// the standard); all variate transforms are implemented here so results do
// not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : seed_mix_(splitmix64(seed)), engine_(splitmix64(seed)) {}

  // Independent substream, e.g. one per repetition or per generation call.
  Rng derive(uint64_t stream) const {
    Rng r(0);
    const uint64_t mixed = splitmix64(seed_mix_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
    r.seed_mix_ = mixed;
    r.engine_.seed(mixed);
    return r;
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1); safe as a log argument.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection keeps the draw unbiased.
  int uniform_int(int n) {
    const uint64_t bound = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<int>(x % bound);
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Standard Gumbel: -log(-log U).
  double gumbel() { return -std::log(-std::log(uniform_open())); }

  // Draw from an unnormalized nonnegative weight row; returns the index.
  template <typename Row>
  int categorical(const Row& weights, int n) {
    double total = 0.0;
    for (int k = 0; k < n; ++k) total += weights[k];
    double u = uniform() * total;
    for (int k = 0; k < n; ++k) {
      u -= weights[k];
      if (u < 0.0) return k;
    }
    return n - 1;  // guard against accumulated rounding
  }

 private:
  uint64_t seed_mix_ = 0;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace mdd
