#include "medcorpus/kernels/kernels.hpp"

#if defined(__aarch64__) || defined(__ARM_NEON)

#include <arm_neon.h>

namespace medcorpus::kernels {

void accumulate_bounds_neon(const MaskView& mask, BoundsTable& table) {
  for (int y = 0; y < mask.height; ++y) {
    const std::uint8_t* row = mask.pixels + static_cast<std::size_t>(y) * mask.stride;
    int x = 0;
    for (; x + 16 <= mask.width; x += 16) {
      const uint8x16_t v = vld1q_u8(row + x);
      if (vmaxvq_u8(v) == 0) continue;
      const std::uint8_t first = row[x];
      if (first != 0 && vminvq_u8(vceqq_u8(v, vdupq_n_u8(first))) == 0xFF) {
        detail::record(table, first, x, x + 15, y);
        continue;
      }
      for (int k = 0; k < 16; ++k) {
        const std::uint8_t px = row[x + k];
        if (px != 0) detail::record(table, px, x + k, x + k, y);
      }
    }
    for (; x < mask.width; ++x) {
      const std::uint8_t v = row[x];
      if (v != 0) detail::record(table, v, x, x, y);
    }
  }
}

std::size_t utf8_length_neon(std::string_view text) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
  const std::size_t n = text.size();
  std::size_t continuation = 0;
  std::size_t i = 0;
  const uint8x16_t mask_c0 = vdupq_n_u8(0xC0);
  const uint8x16_t cont = vdupq_n_u8(0x80);
  for (; i + 16 <= n; i += 16) {
    const uint8x16_t v = vld1q_u8(p + i);
    const uint8x16_t is_cont = vceqq_u8(vandq_u8(v, mask_c0), cont);
    continuation += vaddvq_u8(vshrq_n_u8(is_cont, 7));
  }
  return (i - continuation) + utf8_length_scalar(text.substr(i));
}

}  // namespace medcorpus::kernels

#endif
