#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "neurmap/loss/objectives.hpp"
#include "neurmap/nets/networks.hpp"

namespace neurmap::train {

/// Training configuration, read from `key = value` lines ('#' starts a
/// comment). Every field below is a key of the same name; `lambda`, `beta`
/// and `alpha` set the loss weights, `levels`, `base_channels`,
/// `patch_levels` and `motion_bound` (the output bound of M, at least
/// `alpha`) the architecture.
struct TrainConfig {
  // A dataset directory holding manifest.tsv (train rows are used) or, for
  // the unpaired sets, a plain directory of PNGs.
  std::string paired_dir;
  std::string blurry_dir;
  std::string sharp_dir;
  std::string output_dir = "run";

  int paired_batch = 1;
  int unpaired_batch = 2;
  int crop = 48;  // square training crop, 0 = whole images
  bool flip = true;
  long total_steps = 5000;

  double lr_d = 5e-5;
  double lr_m = 1e-4;
  double lr_n = 1e-4;
  loss::LossWeights weights;
  int n_steps = 15;  // reblur samples
  nets::ArchConfig arch;
  std::uint64_t seed = 0;

  long checkpoint_every = 1000;  // 0 = final checkpoint only
  long log_every = 50;
  long sample_every = 500;  // 0 = no sample grids

  bool disable_reblur_d = false;
  bool disable_reblur_m = false;
  bool disable_tv = false;
  bool disable_natural = false;
  bool disable_sharp = false;
  // Experimental: train without the paired content loss.
  bool unsupervised = false;

  void validate() const;
  loss::ObjectiveOptions objective_options() const;

  /// Applies one key; unknown keys and malformed values throw.
  void set(const std::string& key, const std::string& value);
  /// One `key = value` line per field in a fixed order; parse(to_text())
  /// reproduces the config exactly.
  std::string to_text() const;
  static TrainConfig parse(const std::string& text);
  static TrainConfig parse(const std::string& text, TrainConfig base);
  static TrainConfig load(const std::filesystem::path& path);
};

/// lr0 * (1 - step/total_steps) for 0 <= step <= total_steps.
double lr_at(long step, double lr0, long total_steps);

}  // namespace neurmap::train
