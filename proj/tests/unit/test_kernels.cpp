#include <doctest.h>

#include <random>
#include <vector>

#include "medcorpus/kernels/kernels.hpp"

using namespace medcorpus::kernels;

namespace {

// Per-pixel min/max, independent of any row-run logic.
BoundsTable brute_bounds(const std::vector<std::uint8_t>& px, int w, int h, std::size_t stride) {
  BoundsTable t;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto id = px[y * stride + x];
      if (id == 0) continue;
      t.x_min[id] = std::min(t.x_min[id], x);
      t.x_max[id] = std::max(t.x_max[id], x);
      t.y_min[id] = std::min(t.y_min[id], y);
      t.y_max[id] = std::max(t.y_max[id], y);
    }
  }
  return t;
}

std::size_t brute_utf8(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::vector<Isa> compiled_isas() {
  std::vector<Isa> out{Isa::scalar};
  for (Isa i : {Isa::avx2, Isa::neon}) {
    if (isa_supported(i)) out.push_back(i);
  }
  return out;
}

void run_bounds(Isa isa, const MaskView& m, BoundsTable& t) {
  switch (isa) {
    case Isa::scalar: return accumulate_bounds_scalar(m, t);
    case Isa::avx2: return accumulate_bounds_avx2(m, t);
    case Isa::neon: return accumulate_bounds_neon(m, t);
  }
}

std::size_t run_utf8(Isa isa, std::string_view s) {
  switch (isa) {
    case Isa::scalar: return utf8_length_scalar(s);
    case Isa::avx2: return utf8_length_avx2(s);
    case Isa::neon: return utf8_length_neon(s);
  }
  return 0;
}

}  // namespace

TEST_CASE("detected ISA is supported and dispatch honours force_isa") {
  CHECK(isa_supported(detected_isa()));
  CHECK(isa_supported(Isa::scalar));
  force_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  force_isa(std::nullopt);
  CHECK(active_isa() == detected_isa());
}

TEST_CASE("bounds kernels match per-pixel scan on random masks") {
  std::mt19937_64 gen(1234);
  for (Isa isa : compiled_isas()) {
    CAPTURE(isa_name(isa));
    for (int iter = 0; iter < 1500; ++iter) {
      const int w = 1 + static_cast<int>(gen() % 140);
      const int h = 1 + static_cast<int>(gen() % 40);
      const std::size_t stride = w + gen() % 5;
      std::vector<std::uint8_t> px(stride * h, 0);
      const int ids = 1 + static_cast<int>(gen() % 6);
      const int density = static_cast<int>(gen() % 100);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (static_cast<int>(gen() % 100) < density) px[y * stride + x] = static_cast<std::uint8_t>(1 + gen() % ids);
        }
        // Padding bytes past the row width must never be read as pixels.
        for (std::size_t x = w; x < stride; ++x) px[y * stride + x] = 255;
      }
      BoundsTable got;
      run_bounds(isa, {px.data(), w, h, stride}, got);
      const auto want = brute_bounds(px, w, h, stride);
      REQUIRE(got == want);
    }
  }
}

TEST_CASE("bounds kernels handle full-range ids and empty masks") {
  for (Isa isa : compiled_isas()) {
    std::vector<std::uint8_t> px(256);
    for (int i = 0; i < 256; ++i) px[i] = static_cast<std::uint8_t>(i);
    BoundsTable t;
    run_bounds(isa, {px.data(), 64, 4, 64}, t);
    CHECK_FALSE(t.present(0));
    CHECK(t == brute_bounds(px, 64, 4, 64));

    std::vector<std::uint8_t> zeros(100, 0);
    BoundsTable e;
    run_bounds(isa, {zeros.data(), 10, 10, 10}, e);
    CHECK(e == BoundsTable{});
  }
}

TEST_CASE("utf8 length kernels agree with the byte-class count") {
  std::mt19937_64 gen(99);
  const std::vector<std::string> pieces = {"a", "Z", " ", "\xc3\xa9", "\xe4\xb8\xad", "\xf0\x9f\x98\x80", "\x80", "\xff"};
  for (Isa isa : compiled_isas()) {
    CAPTURE(isa_name(isa));
    CHECK(run_utf8(isa, "") == 0);
    CHECK(run_utf8(isa, "\xe8\x82\xba\xe7\xbb\x93\xe8\x8a\x82") == 3);
    for (int iter = 0; iter < 1000; ++iter) {
      std::string s;
      const auto n = gen() % 300;
      for (std::size_t i = 0; i < n; ++i) s += pieces[gen() % pieces.size()];
      // Misaligned views exercise the unaligned head and the tail.
      const auto off = s.empty() ? 0 : gen() % std::min<std::size_t>(s.size(), 7);
      const std::string_view v(s.data() + off, s.size() - off);
      REQUIRE(run_utf8(isa, v) == brute_utf8(v));
    }
  }
}
