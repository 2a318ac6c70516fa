#include "medcorpus/rng.hpp"

#include <cmath>
#include <numeric>

#include "medcorpus/error.hpp"

namespace medcorpus {

std::vector<std::uint32_t> SeededRng::sample_indices(std::uint32_t n, std::uint32_t k) {
  if (k > n) throw Error(ErrorCode::InvalidArgument, "sample size exceeds population");
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::uint32_t>(uniform_below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::uint64_t round_half_up_fraction(std::uint64_t count, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "fraction outside [0,1]");
  }
  constexpr std::uint64_t kScale = 1'000'000;
  const auto ppm = static_cast<std::uint64_t>(std::llround(fraction * kScale));
  // count * ppm fits in 64 bits for any count below ~1.8e13.
  return (count * ppm + kScale / 2) / kScale;
}

}  // namespace medcorpus
