#pragma once

#include <cstdint>
#include <filesystem>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::blur {

/// Random sharp test scene: a two-colour gradient background, a handful of
/// anti-aliased rectangles, ellipses and stripe-textured patches. Values in
/// [0,1], already on the 8-bit grid.
diff::Tensor procedural_image(std::uint64_t seed, std::size_t h, std::size_t w);

/// Writes `count` procedural images as img_000.png, img_001.png, ... into `dir`.
void write_procedural_images(const std::filesystem::path& dir, std::size_t count,
                             std::uint64_t seed, std::size_t h, std::size_t w);

}  // namespace neurmap::blur
