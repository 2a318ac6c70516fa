// Compiled with -mavx2; only reached after a runtime CPU check.
#include "medcorpus/kernels/kernels.hpp"

#if defined(MEDCORPUS_HAVE_AVX2_KERNELS)

#include <immintrin.h>

namespace medcorpus::kernels {

void accumulate_bounds_avx2(const MaskView& mask, BoundsTable& table) {
  const __m256i zero = _mm256_setzero_si256();
  for (int y = 0; y < mask.height; ++y) {
    const std::uint8_t* row = mask.pixels + static_cast<std::size_t>(y) * mask.stride;
    int x = 0;
    for (; x + 32 <= mask.width; x += 32) {
      const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row + x));
      const auto zero_bits =
          static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(v, zero)));
      if (zero_bits == 0xFFFFFFFFu) continue;

      // Uniform chunk (typical mask interior): one update covers 32 pixels.
      const std::uint8_t first = row[x];
      if (first != 0) {
        const auto same_bits = static_cast<std::uint32_t>(_mm256_movemask_epi8(
            _mm256_cmpeq_epi8(v, _mm256_set1_epi8(static_cast<char>(first)))));
        if (same_bits == 0xFFFFFFFFu) {
          detail::record(table, first, x, x + 31, y);
          continue;
        }
      }

      std::uint32_t nonzero = ~zero_bits;
      while (nonzero != 0) {
        const int bit = __builtin_ctz(nonzero);
        const int px = x + bit;
        detail::record(table, row[px], px, px, y);
        nonzero &= nonzero - 1;
      }
    }
    for (; x < mask.width; ++x) {
      const std::uint8_t v = row[x];
      if (v != 0) detail::record(table, v, x, x, y);
    }
  }
}

std::size_t utf8_length_avx2(std::string_view text) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
  const std::size_t n = text.size();
  // Continuation bytes 0x80..0xBF are exactly the signed bytes < -64.
  const __m256i threshold = _mm256_set1_epi8(-64);
  std::size_t continuation = 0;
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i));
    const auto bits =
        static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpgt_epi8(threshold, v)));
    continuation += static_cast<std::size_t>(__builtin_popcount(bits));
  }
  return (i - continuation) + utf8_length_scalar(text.substr(i));
}

}  // namespace medcorpus::kernels

#endif
