#pragma once

#include <utility>

#include "neurmap/blur/motion_map.hpp"
#include "neurmap/diff/tensor.hpp"

namespace neurmap::blur {

inline constexpr int kDefaultSteps = 15;

/// Bilinear backward warp: out(p) = image(p + offsets(p)). Sample
/// coordinates are clamped to the image (edge replicate). Differentiable in
/// both the image and the offsets.
template <typename T>
diff::BasicTensor<T> warp(const diff::BasicTensor<T>& image, const diff::BasicTensor<T>& offsets);

/// Reblurring operator: the average of n_steps warps of `sharp` along
/// offsets t_n * motion, with t_n = n/(n_steps-1) - 1/2.
///
/// Evaluated as one fused node; accumulation runs in wider precision so a
/// zero motion reproduces `sharp` bitwise and constant images stay constant.
template <typename T>
diff::BasicTensor<T> reblur(const diff::BasicTensor<T>& sharp, const MotionMap<T>& motion,
                            int n_steps = kDefaultSteps);

/// Reference blur for a motion that is constant over the image: the n_steps
/// sample offsets are bilinearly splatted onto a kernel grid, normalized,
/// and applied as a direct correlation with edge replicate. Interior pixels
/// agree with reblur().
template <typename T>
diff::BasicTensor<T> line_kernel_oracle(const diff::BasicTensor<T>& sharp,
                                        std::pair<double, double> uniform_motion, int n_steps);

/// The kernel line_kernel_oracle applies, [2r+1, 2r+1] row-major with
/// (r, r) the zero offset.
struct LineKernel {
  int radius = 0;
  std::vector<double> taps;
  double at(int dy, int dx) const {
    return taps[static_cast<std::size_t>((dy + radius) * (2 * radius + 1) + dx + radius)];
  }
};
LineKernel line_kernel(std::pair<double, double> uniform_motion, int n_steps);

}  // namespace neurmap::blur
