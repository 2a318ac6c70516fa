#include "medcorpus/kernels/kernels.hpp"

namespace medcorpus::kernels {

void accumulate_bounds_scalar(const MaskView& mask, BoundsTable& table) {
  for (int y = 0; y < mask.height; ++y) {
    const std::uint8_t* row = mask.pixels + static_cast<std::size_t>(y) * mask.stride;
    for (int x = 0; x < mask.width; ++x) {
      const std::uint8_t v = row[x];
      if (v != 0) detail::record(table, v, x, x, y);
    }
  }
}

std::size_t utf8_length_scalar(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace medcorpus::kernels
