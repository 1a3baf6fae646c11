#include "neurmap/io/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace neurmap::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

unsigned char to_byte(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<unsigned char>(std::lround(c * 255.f));
}

}  // namespace

diff::Tensor read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + msg);
  }
  const std::size_t h = image.height, w = image.width;
  std::vector<float> v(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        v[(c * h + y) * w + x] = static_cast<float>(buf[(y * w + x) * 3 + c]) / 255.0f;
      }
    }
  }
  return diff::Tensor(diff::Shape{3, h, w}, std::move(v));
}

void write_png(const std::filesystem::path& path, const diff::Tensor& img) {
  if (img.rank() != 3 || (img.dim(0) != 3 && img.dim(0) != 1)) {
    throw std::invalid_argument("write_png: expected [3,h,w] or [1,h,w], got " +
                                diff::shape_str(img.shape()));
  }
  const std::size_t ch = img.dim(0), h = img.dim(1), w = img.dim(2);
  std::vector<unsigned char> buf(h * w * 3);
  const auto v = img.values();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src = ch == 1 ? 0 : c;
        buf[(y * w + x) * 3 + c] = to_byte(v[(src * h + y) * w + x]);
      }
    }
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (!png_image_write_to_stdio(&image, f.get(), 0, buf.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + image.message);
  }
  if (std::fflush(f.get()) != 0) throw std::runtime_error("write failed for " + path.string());
}

diff::Tensor quantize8(const diff::Tensor& image) {
  std::vector<float> v(image.values().begin(), image.values().end());
  for (auto& x : v) x = static_cast<float>(to_byte(x)) / 255.0f;
  return diff::Tensor(image.shape(), std::move(v));
}

}  // namespace neurmap::io
