#include "neurmap/io/motion_file.hpp"

#include <fstream>
#include <stdexcept>

#include "neurmap/io/binary.hpp"

namespace neurmap::io {

void write_motion_file(const std::filesystem::path& path, const diff::Tensor& field) {
  if (field.rank() != 3 || field.dim(0) != 2) {
    throw std::invalid_argument("motion file: expected [2,h,w], got " +
                                diff::shape_str(field.shape()));
  }
  const std::size_t h = field.dim(1), w = field.dim(2);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write("NMAP", 4);
  put_u32(os, static_cast<std::uint32_t>(h));
  put_u32(os, static_cast<std::uint32_t>(w));
  const auto v = field.values();
  for (std::size_t i = 0; i < h * w; ++i) {
    put_f32(os, v[i]);
    put_f32(os, v[h * w + i]);
  }
  if (!os.flush()) throw std::runtime_error("write failed for " + path.string());
}

diff::Tensor read_motion_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open motion file " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "NMAP") {
    throw std::runtime_error("not a motion file (bad magic): " + path.string());
  }
  const std::size_t h = get_u32(is, "motion height");
  const std::size_t w = get_u32(is, "motion width");
  if (h == 0 || w == 0 || h * w > (1u << 26)) {
    throw std::runtime_error("implausible motion map size in " + path.string());
  }
  std::vector<float> v(2 * h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    v[i] = get_f32(is, "motion u");
    v[h * w + i] = get_f32(is, "motion v");
  }
  return diff::Tensor(diff::Shape{2, h, w}, std::move(v));
}

}  // namespace neurmap::io
