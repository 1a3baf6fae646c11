#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neurmap/blur/reblur.hpp"
#include "neurmap/blur/synth.hpp"

namespace neurmap::blur {

struct DatasetOptions {
  SynthParams synth;
  int n_steps = kDefaultSteps;
  bool zero_motion = false;  // write blurry = sharp, motion = 0
  int test_every = 6;        // image i goes to the test split when i % test_every == test_every-1
};

struct ManifestRow {
  std::string sharp, blurry, motion, split;
  std::uint64_t seed = 0;
};
using Manifest = std::vector<ManifestRow>;

inline constexpr const char* kManifestName = "manifest.tsv";

/// Blurs every readable image in `sharp_dir` (sorted by filename) with
/// `kernels_per_image` synthesized motion fields and writes
///   out_dir/sharp/<stem>.png, out_dir/blurry/<stem>_k<k>.png,
///   out_dir/motion/<stem>_k<k>.mmap, out_dir/manifest.tsv
/// Manifest paths are relative to out_dir. The split is assigned per sharp
/// image, so test scenes never appear in training.
Manifest make_dataset(const std::filesystem::path& sharp_dir, int kernels_per_image,
                      std::uint64_t seed, const std::filesystem::path& out_dir,
                      const DatasetOptions& opts = {});

void write_manifest(const std::filesystem::path& file, const Manifest& rows);

/// Reads out_dir/manifest.tsv; returned paths are joined onto `dir`.
Manifest load_manifest(const std::filesystem::path& dir);

/// Regular files under `dir` with a .png extension, sorted by name.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace neurmap::blur
