#include "medcorpus/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <string>

#include "medcorpus/error.hpp"

namespace medcorpus {
namespace {

struct PngImageGuard {
  png_image* image;
  ~PngImageGuard() { png_image_free(image); }
};

std::string lower_ext(const std::filesystem::path& file) {
  std::string ext = file.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

GrayImage read_gray_png(const std::filesystem::path& file) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  PngImageGuard guard{&image};
  if (!png_image_begin_read_from_file(&image, file.string().c_str())) {
    throw Error(ErrorCode::ImageDecode, file.string() + ": " + image.message);
  }
  if (image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) {
    throw Error(ErrorCode::ImageDecode, file.string() + ": mask must be single-channel grayscale");
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::ImageDecode, file.string() + ": " + image.message);
  }
  return out;
}

void write_gray_png(const std::filesystem::path& file, const GrayImage& img) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, file.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::Io, file.string() + ": " + msg);
  }
}

std::optional<ImageSize> probe_image_size(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::array<unsigned char, 24> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  if (in.gcount() < 4) return std::nullopt;

  static constexpr std::array<unsigned char, 8> kPngSig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (in.gcount() == 24 && std::equal(kPngSig.begin(), kPngSig.end(), head.begin())) {
    auto be32 = [&](int off) {
      return (head[off] << 24) | (head[off + 1] << 16) | (head[off + 2] << 8) | head[off + 3];
    };
    return ImageSize{be32(16), be32(20)};
  }

  if (head[0] == 0xFF && head[1] == 0xD8) {
    // Walk JPEG markers until a start-of-frame segment.
    in.clear();
    in.seekg(2);
    while (in) {
      int c = in.get();
      if (c != 0xFF) return std::nullopt;
      int marker = in.get();
      while (marker == 0xFF) marker = in.get();
      if (marker == 0xD8 || (marker >= 0xD0 && marker <= 0xD7) || marker == 0x01) continue;
      const int hi = in.get();
      const int lo = in.get();
      if (!in) return std::nullopt;
      const int len = (hi << 8) | lo;
      const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
                       marker != 0xCC;
      if (sof) {
        std::array<unsigned char, 5> sofh{};
        in.read(reinterpret_cast<char*>(sofh.data()), sofh.size());
        if (!in) return std::nullopt;
        return ImageSize{(sofh[3] << 8) | sofh[4], (sofh[1] << 8) | sofh[2]};
      }
      in.seekg(len - 2, std::ios::cur);
    }
  }
  return std::nullopt;
}

std::string image_mime_type(const std::filesystem::path& file) {
  const auto ext = lower_ext(file);
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".tif" || ext == ".tiff") return "image/tiff";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace medcorpus
