#pragma once

#include <filesystem>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::io {

// Motion-map file layout, all little-endian:
//   "NMAP"  u32 height  u32 width  then height*width (f32 u, f32 v) pairs, row-major.

/// `field` is [2,h,w] with channel 0 = u (horizontal), 1 = v (vertical).
void write_motion_file(const std::filesystem::path& path, const diff::Tensor& field);
diff::Tensor read_motion_file(const std::filesystem::path& path);

}  // namespace neurmap::io
