#pragma once

#include <filesystem>
#include <string>

#include "neurmap/train/checkpoint.hpp"

namespace neurmap::train {

/// Edge-replicates a [c,h,w] image up to multiples of `m`.
diff::Tensor pad_to_multiple(const diff::Tensor& image, std::size_t m);

/// Top-left [c,h,w] window.
diff::Tensor crop_to(const diff::Tensor& image, std::size_t h, std::size_t w);

/// D applied to an image of any size (padded for the network, cropped back).
diff::Tensor deblur_image(const InferenceNets& nets, const diff::Tensor& image);

/// M applied to an image of any size; returns the [2,h,w] field.
diff::Tensor estimate_motion(const InferenceNets& nets, const diff::Tensor& image);

/// Held-out scores of a checkpoint on one split of a synthesized dataset.
struct SplitScores {
  std::size_t count = 0;
  double psnr_input = 0;      // PSNR(B, S)
  double psnr_deblurred = 0;  // PSNR(D(B), S)
  double ssim_input = 0;
  double ssim_deblurred = 0;
  double motion_mse = 0;       // sign-invariant error of M(B) against ground truth
  double motion_mse_zero = 0;  // same error for an all-zero prediction
  double relative_motion_mse = 0;  // same error for M(B) - M(D(B))
  double magnitude_blurry = 0;  // mean |M(B)| in pixels
  double magnitude_sharp = 0;   // mean |M(S)| over the split's distinct sharp images
  double magnitude_relative = 0;  // mean |M(B) - M(D(B))|

  double psnr_gain() const { return psnr_deblurred - psnr_input; }
  std::string summary() const;
};

SplitScores score_split(const InferenceNets& nets, const std::filesystem::path& dataset_dir,
                        const std::string& split = "test");

}  // namespace neurmap::train
