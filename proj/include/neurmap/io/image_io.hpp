#pragma once

#include <filesystem>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::io {

/// Reads any 8/16-bit PNG and returns [3,h,w] in [0,1] (value/255 for 8-bit).
diff::Tensor read_png(const std::filesystem::path& path);

/// Writes a [3,h,w] (or [1,h,w]) tensor as 8-bit PNG; values are clamped
/// to [0,1] and rounded to the nearest level.
void write_png(const std::filesystem::path& path, const diff::Tensor& image);

/// Quantizes to the 8-bit grid write_png uses, so in-memory data matches
/// what a later read_png returns.
diff::Tensor quantize8(const diff::Tensor& image);

}  // namespace neurmap::io
