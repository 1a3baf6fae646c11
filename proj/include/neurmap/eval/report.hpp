#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace neurmap::eval {

struct MetricRow {
  std::string filename;
  double psnr_db = 0;
  double ssim = 0;
  std::optional<double> motion_mse_px2;
};

struct MetricReport {
  std::vector<MetricRow> rows;  // sorted by filename
  std::string config_echo;

  std::size_t count() const { return rows.size(); }
  double mean_psnr() const;
  double mean_ssim() const;
  /// Mean over the rows that carry a motion error; empty if none do.
  std::optional<double> mean_motion_mse() const;

  /// Header "filename,psnr_db,ssim,motion_mse_px2", one line per image,
  /// then a "mean" line.
  std::string to_csv() const;
  std::string to_table() const;
};

struct EvalPaths {
  std::filesystem::path pred_dir, gt_dir;
  // Optional: .mmap files matched by stem, scored with the sign-invariant error.
  std::filesystem::path pred_motion_dir, gt_motion_dir;
};

/// Scores every PNG in pred_dir against the same-named PNG in gt_dir.
MetricReport evaluate_dirs(const EvalPaths& paths);

}  // namespace neurmap::eval
