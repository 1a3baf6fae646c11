#pragma once

#include "neurmap/blur/motion_map.hpp"
#include "neurmap/diff/tensor.hpp"

namespace neurmap::eval {

inline constexpr double kPsnrCap = 99.0;

/// 10*log10(1/MSE) over all channels of two [3,h,w] images in [0,1];
/// kPsnrCap when MSE < 1e-10.
double psnr(const diff::Tensor& a, const diff::Tensor& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// BT.601 luma of a [3,h,w] image, as an h*w row-major array.
std::vector<double> luma(const diff::Tensor& image);

/// Mean local SSIM of the luma images over every position where the
/// Gaussian window fits entirely (dynamic range 1).
double ssim(const diff::Tensor& a, const diff::Tensor& b, const SsimOptions& opt = {});

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_taps(int window, double sigma);

/// Mean over pixels and both components of the squared difference.
double motion_mse(const diff::Tensor& pred, const diff::Tensor& gt);

/// Per-pixel min(|p - g|^2, |p + g|^2) / 2 averaged over pixels. A linear
/// blur along m is the same blur as along -m, so this compares motions
/// without penalizing the arbitrary sign.
double motion_mse_sign_invariant(const diff::Tensor& pred, const diff::Tensor& gt);

/// Mean per-pixel vector magnitude of a [2,h,w] field.
double mean_magnitude(const diff::Tensor& field);

}  // namespace neurmap::eval
