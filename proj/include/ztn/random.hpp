#pragma once

// Portable seeded sampling. The standard distributions are implementation
// defined, so sampling is done here on top of mt19937_64 (whose output
// sequence is fixed by the standard) to keep runs bit-identical across
// toolchains.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>

#include "ztn/errors.hpp"

namespace ztn {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw ConfigError("cannot draw an index from an empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
  }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  /// Poisson count. Knuth's product method, split into chunks of rate <= 30
  /// so exp(-rate) never underflows; sums of independent Poissons stay Poisson.
  std::uint64_t poisson(double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("Poisson rate must be finite and non-negative");
    constexpr double kChunk = 30.0;
    std::uint64_t total = 0;
    while (rate > 0.0) {
      const double r = rate > kChunk ? kChunk : rate;
      rate -= r;
      const double limit = std::exp(-r);
      double p = uniform();
      while (p > limit) {
        ++total;
        p *= uniform();
      }
    }
    return total;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ztn
