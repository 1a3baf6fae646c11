#include "neurmap/train/inference.hpp"

#include <fmt/format.h>

#include <set>
#include <stdexcept>

#include "neurmap/blur/dataset.hpp"
#include "neurmap/diff/ops.hpp"
#include "neurmap/eval/metrics.hpp"
#include "neurmap/io/image_io.hpp"
#include "neurmap/io/motion_file.hpp"

namespace neurmap::train {

diff::Tensor pad_to_multiple(const diff::Tensor& t, std::size_t m) {
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  const std::size_t ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  if (ph == h && pw == w) return t;
  std::vector<float> out(c * ph * pw);
  const auto v = t.values();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t x = 0; x < pw; ++x)
        out[(ch * ph + y) * pw + x] = v[(ch * h + std::min(y, h - 1)) * w + std::min(x, w - 1)];
  return diff::Tensor(diff::Shape{c, ph, pw}, std::move(out));
}

diff::Tensor crop_to(const diff::Tensor& t, std::size_t h, std::size_t w) {
  const std::size_t c = t.dim(0), pw = t.dim(2);
  if (h > t.dim(1) || w > pw) throw std::invalid_argument("crop_to: window larger than image");
  if (t.dim(1) == h && pw == w) return t;
  std::vector<float> out(c * h * w);
  const auto v = t.values();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out[(ch * h + y) * w + x] = v[(ch * t.dim(1) + y) * pw + x];
  return diff::Tensor(diff::Shape{c, h, w}, std::move(out));
}

namespace {
std::size_t multiple(const InferenceNets& nets) { return std::size_t{1} << nets.config.arch.levels; }
}  // namespace

diff::Tensor deblur_image(const InferenceNets& nets, const diff::Tensor& image) {
  diff::NoGradGuard guard;
  const auto y = nets::deblur_forward(nets.d, pad_to_multiple(image, multiple(nets)));
  return crop_to(y, image.dim(1), image.dim(2));
}

diff::Tensor estimate_motion(const InferenceNets& nets, const diff::Tensor& image) {
  diff::NoGradGuard guard;
  const auto m = nets::motion_forward(nets.m, pad_to_multiple(image, multiple(nets)));
  return crop_to(m.field, image.dim(1), image.dim(2));
}

std::string SplitScores::summary() const {
  return fmt::format(
      "{} samples: PSNR {:.3f} -> {:.3f} dB (gain {:+.3f}), SSIM {:.4f} -> {:.4f}, "
      "motion MSE {:.3f} relative {:.3f} (zero field {:.3f}), mean |M(B)| {:.3f} px, |M(S)| {:.3f} px, "
      "|M_rel| {:.3f} px",
      count, psnr_input, psnr_deblurred, psnr_gain(), ssim_input, ssim_deblurred, motion_mse, relative_motion_mse,
      motion_mse_zero, magnitude_blurry, magnitude_sharp, magnitude_relative);
}

SplitScores score_split(const InferenceNets& nets, const std::filesystem::path& dataset_dir,
                        const std::string& split) {
  SplitScores s;
  std::set<std::string> sharp_seen;
  std::size_t n_sharp = 0;
  for (const auto& row : blur::load_manifest(dataset_dir)) {
    if (row.split != split) continue;
    const auto b = io::read_png(row.blurry);
    const auto sharp = io::read_png(row.sharp);
    const auto gt = io::read_motion_file(row.motion);
    const auto d = deblur_image(nets, b);
    const auto m = estimate_motion(nets, b);
    s.psnr_input += eval::psnr(b, sharp);
    s.psnr_deblurred += eval::psnr(d, sharp);
    s.ssim_input += eval::ssim(b, sharp);
    s.ssim_deblurred += eval::ssim(d, sharp);
    s.motion_mse += eval::motion_mse_sign_invariant(m, gt);
    s.motion_mse_zero += eval::motion_mse_sign_invariant(diff::Tensor(gt.shape()), gt);
    s.magnitude_blurry += eval::mean_magnitude(m);
    const auto rel = diff::sub(m, estimate_motion(nets, d));
    s.relative_motion_mse += eval::motion_mse_sign_invariant(rel, gt);
    s.magnitude_relative += eval::mean_magnitude(rel);
    if (sharp_seen.insert(row.sharp).second) {
      s.magnitude_sharp += eval::mean_magnitude(estimate_motion(nets, sharp));
      ++n_sharp;
    }
    ++s.count;
  }
  if (s.count == 0) throw std::runtime_error("no '" + split + "' rows in " + dataset_dir.string());
  const double n = static_cast<double>(s.count);
  s.psnr_input /= n;
  s.psnr_deblurred /= n;
  s.ssim_input /= n;
  s.ssim_deblurred /= n;
  s.motion_mse /= n;
  s.motion_mse_zero /= n;
  s.magnitude_blurry /= n;
  s.relative_motion_mse /= n;
  s.magnitude_relative /= n;
  s.magnitude_sharp /= static_cast<double>(n_sharp);
  return s;
}

}  // namespace neurmap::train
