#include "neurmap/eval/report.hpp"

#include <fmt/format.h>

#include <stdexcept>

#include "neurmap/blur/dataset.hpp"
#include "neurmap/eval/metrics.hpp"
#include "neurmap/io/image_io.hpp"
#include "neurmap/io/motion_file.hpp"

namespace neurmap::eval {

namespace fs = std::filesystem;

double MetricReport::mean_psnr() const {
  double s = 0;
  for (const auto& r : rows) s += r.psnr_db;
  return rows.empty() ? 0 : s / static_cast<double>(rows.size());
}

double MetricReport::mean_ssim() const {
  double s = 0;
  for (const auto& r : rows) s += r.ssim;
  return rows.empty() ? 0 : s / static_cast<double>(rows.size());
}

std::optional<double> MetricReport::mean_motion_mse() const {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (r.motion_mse_px2) s += *r.motion_mse_px2, ++n;
  if (!n) return std::nullopt;
  return s / static_cast<double>(n);
}

namespace {
std::string opt_field(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); }
}  // namespace

std::string MetricReport::to_csv() const {
  std::string out = "filename,psnr_db,ssim,motion_mse_px2\n";
  for (const auto& r : rows)
    out += fmt::format("{},{:.6f},{:.6f},{}\n", r.filename, r.psnr_db, r.ssim, opt_field(r.motion_mse_px2));
  out += fmt::format("mean,{:.6f},{:.6f},{}\n", mean_psnr(), mean_ssim(), opt_field(mean_motion_mse()));
  return out;
}

std::string MetricReport::to_table() const {
  std::string out = fmt::format("{:<32} {:>10} {:>8} {:>12}\n", "filename", "PSNR(dB)", "SSIM", "motion(px2)");
  auto line = [&](const std::string& name, double p, double s, const std::optional<double>& m) {
    out += fmt::format("{:<32} {:>10.3f} {:>8.4f} {:>12}\n", name, p, s, m ? fmt::format("{:.3f}", *m) : "-");
  };
  for (const auto& r : rows) line(r.filename, r.psnr_db, r.ssim, r.motion_mse_px2);
  line(fmt::format("mean ({} images)", rows.size()), mean_psnr(), mean_ssim(), mean_motion_mse());
  return out;
}

MetricReport evaluate_dirs(const EvalPaths& paths) {
  if (!fs::is_directory(paths.pred_dir)) throw std::runtime_error("not a directory: " + paths.pred_dir.string());
  if (!fs::is_directory(paths.gt_dir)) throw std::runtime_error("not a directory: " + paths.gt_dir.string());
  const bool with_motion = !paths.pred_motion_dir.empty() || !paths.gt_motion_dir.empty();
  if (with_motion && (paths.pred_motion_dir.empty() || paths.gt_motion_dir.empty()))
    throw std::invalid_argument("eval: motion scoring needs both a predicted and a ground-truth motion directory");
  MetricReport report;
  report.config_echo = "pred_dir=" + paths.pred_dir.string() + " gt_dir=" + paths.gt_dir.string();
  for (const auto& pred : blur::list_pngs(paths.pred_dir)) {
    const auto gt = paths.gt_dir / pred.filename();
    if (!fs::exists(gt)) throw std::runtime_error("eval: no ground truth for " + pred.filename().string());
    const auto a = io::read_png(pred), b = io::read_png(gt);
    MetricRow row{pred.filename().string(), psnr(a, b), ssim(a, b), std::nullopt};
    if (with_motion) {
      const auto stem = pred.stem().string() + ".mmap";
      row.motion_mse_px2 = motion_mse_sign_invariant(io::read_motion_file(paths.pred_motion_dir / stem),
                                                     io::read_motion_file(paths.gt_motion_dir / stem));
    }
    report.rows.push_back(std::move(row));
  }
  if (report.rows.empty()) throw std::runtime_error("eval: no PNG files in " + paths.pred_dir.string());
  return report;
}

}  // namespace neurmap::eval
