#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace medcorpus {

/// 8-bit single-channel image, row-major, tightly packed.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::span<const std::uint8_t> row(int y) const {
    return {pixels.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }
  bool empty() const noexcept { return width == 0 || height == 0; }
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// Decodes an 8-bit grayscale PNG (lower bit depths are expanded).
/// Colour PNGs are rejected with ImageDecode; masks must be single-channel.
GrayImage read_gray_png(const std::filesystem::path& file);
void write_gray_png(const std::filesystem::path& file, const GrayImage& image);

/// Reads dimensions from a PNG or JPEG header without decoding pixels.
std::optional<ImageSize> probe_image_size(const std::filesystem::path& file);

std::string image_mime_type(const std::filesystem::path& file);

}  // namespace medcorpus
