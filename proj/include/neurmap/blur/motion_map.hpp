#pragma once

#include <cstddef>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::blur {

/// Per-pixel linear blur vector (u, v) in pixels, stored as a [2,h,w]
/// tensor: channel 0 horizontal, channel 1 vertical.
template <typename T>
struct MotionMap {
  diff::BasicTensor<T> field;
  double alpha = 40.0;  // component bound when produced by M or the synthesizer

  MotionMap() = default;
  MotionMap(diff::BasicTensor<T> f, double bound);

  static MotionMap zeros(std::size_t h, std::size_t w, double bound = 40.0);
  static MotionMap uniform(std::size_t h, std::size_t w, T u, T v, double bound = 40.0);

  std::size_t height() const { return field.dim(1); }
  std::size_t width() const { return field.dim(2); }
  T u(std::size_t y, std::size_t x) const { return field.at(0, y, x); }
  T v(std::size_t y, std::size_t x) const { return field.at(1, y, x); }
  double max_abs_component() const;
};

/// M_rel = M_B - M_Shat, componentwise. Zero once deblurring is complete,
/// M_B when the deblurrer is the identity.
template <typename T>
MotionMap<T> relative_motion(const MotionMap<T>& m_blurry, const MotionMap<T>& m_deblurred);

}  // namespace neurmap::blur
