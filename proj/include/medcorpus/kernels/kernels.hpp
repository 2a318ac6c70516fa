#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference and
// SIMD variants; the public entry points dispatch on the ISA detected at
// first use (overridable for equivalence tests).

#include <array>
#include <climits>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace medcorpus::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

/// Best ISA the running CPU supports among those compiled in.
Isa detected_isa() noexcept;
/// ISA used by the dispatching entry points.
Isa active_isa() noexcept;
/// Pins dispatch to `isa` (nullopt restores detection). Requests for an
/// unsupported ISA fall back to scalar. Not thread-safe against concurrent
/// kernel calls; intended for tests and benchmarks.
void force_isa(std::optional<Isa> isa) noexcept;
bool isa_supported(Isa isa) noexcept;

/// Per-instance-id bounding extents over an 8-bit label mask. Id 0 is
/// background and is never recorded.
struct BoundsTable {
  std::array<std::int32_t, 256> x_min;
  std::array<std::int32_t, 256> y_min;
  std::array<std::int32_t, 256> x_max;
  std::array<std::int32_t, 256> y_max;

  BoundsTable() { reset(); }
  void reset() {
    x_min.fill(INT32_MAX);
    y_min.fill(INT32_MAX);
    x_max.fill(-1);
    y_max.fill(-1);
  }
  bool present(std::uint8_t id) const { return x_max[id] >= 0; }
  bool operator==(const BoundsTable&) const = default;
};

struct MaskView {
  const std::uint8_t* pixels = nullptr;
  int width = 0;
  int height = 0;
  std::size_t stride = 0;  // bytes between row starts
};

/// Folds every nonzero pixel of `mask` into `table`.
void accumulate_bounds(const MaskView& mask, BoundsTable& table);
void accumulate_bounds_scalar(const MaskView& mask, BoundsTable& table);
void accumulate_bounds_avx2(const MaskView& mask, BoundsTable& table);
void accumulate_bounds_neon(const MaskView& mask, BoundsTable& table);

/// Number of Unicode code points in UTF-8 text (counts non-continuation
/// bytes; malformed input is counted byte-wise, never rejected).
std::size_t utf8_length(std::string_view text);
std::size_t utf8_length_scalar(std::string_view text);
std::size_t utf8_length_avx2(std::string_view text);
std::size_t utf8_length_neon(std::string_view text);

namespace detail {
inline void record(BoundsTable& t, std::uint8_t id, std::int32_t x0, std::int32_t x1,
                   std::int32_t y) {
  if (x0 < t.x_min[id]) t.x_min[id] = x0;
  if (x1 > t.x_max[id]) t.x_max[id] = x1;
  if (y < t.y_min[id]) t.y_min[id] = y;
  if (y > t.y_max[id]) t.y_max[id] = y;
}
}  // namespace detail

}  // namespace medcorpus::kernels
