#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace medcorpus {

/// mt19937_64 with hand-rolled bounded draws. The standard distributions
/// are implementation-defined, so they are avoided wherever output must be
/// identical across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::uint32_t> sample_indices(std::uint32_t n, std::uint32_t k);

 private:
  std::mt19937_64 engine_;
};

/// Round-half-up of count * fraction, exact for fractions given to six
/// decimal places (fractions are quantised to parts per million).
std::uint64_t round_half_up_fraction(std::uint64_t count, double fraction);

}  // namespace medcorpus
