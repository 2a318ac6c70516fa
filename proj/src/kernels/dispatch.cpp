#include <atomic>

#include "medcorpus/kernels/kernels.hpp"

namespace medcorpus::kernels {
namespace {

constexpr int kDetect = -1;
std::atomic<int> g_forced{kDetect};

}  // namespace

// Fallback definitions keep the symbols linkable on targets without the
// ISA; isa_supported() never selects them there.
#if !defined(MEDCORPUS_HAVE_AVX2_KERNELS)
void accumulate_bounds_avx2(const MaskView& mask, BoundsTable& table) {
  accumulate_bounds_scalar(mask, table);
}
std::size_t utf8_length_avx2(std::string_view text) { return utf8_length_scalar(text); }
#endif

#if !(defined(__aarch64__) || defined(__ARM_NEON))
void accumulate_bounds_neon(const MaskView& mask, BoundsTable& table) {
  accumulate_bounds_scalar(mask, table);
}
std::size_t utf8_length_neon(std::string_view text) { return utf8_length_scalar(text); }
#endif

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "scalar";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(MEDCORPUS_HAVE_AVX2_KERNELS)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__) || defined(__ARM_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() noexcept {
  static const Isa isa = [] {
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    if (isa_supported(Isa::neon)) return Isa::neon;
    return Isa::scalar;
  }();
  return isa;
}

Isa active_isa() noexcept {
  const int forced = g_forced.load(std::memory_order_relaxed);
  return forced == kDetect ? detected_isa() : static_cast<Isa>(forced);
}

void force_isa(std::optional<Isa> isa) noexcept {
  if (!isa) {
    g_forced.store(kDetect, std::memory_order_relaxed);
    return;
  }
  g_forced.store(static_cast<int>(isa_supported(*isa) ? *isa : Isa::scalar),
                 std::memory_order_relaxed);
}

void accumulate_bounds(const MaskView& mask, BoundsTable& table) {
  switch (active_isa()) {
    case Isa::avx2: return accumulate_bounds_avx2(mask, table);
    case Isa::neon: return accumulate_bounds_neon(mask, table);
    case Isa::scalar: break;
  }
  accumulate_bounds_scalar(mask, table);
}

std::size_t utf8_length(std::string_view text) {
  switch (active_isa()) {
    case Isa::avx2: return utf8_length_avx2(text);
    case Isa::neon: return utf8_length_neon(text);
    case Isa::scalar: break;
  }
  return utf8_length_scalar(text);
}

}  // namespace medcorpus::kernels
