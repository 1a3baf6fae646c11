#include "neurmap/blur/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "neurmap/io/image_io.hpp"
#include "neurmap/io/motion_file.hpp"

namespace fs = std::filesystem;

namespace neurmap::blur {

std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Manifest make_dataset(const fs::path& sharp_dir, int kernels_per_image, std::uint64_t seed,
                      const fs::path& out_dir, const DatasetOptions& opts) {
  if (kernels_per_image < 1) throw std::invalid_argument("make_dataset: kernels_per_image must be >= 1");
  if (opts.test_every < 2) throw std::invalid_argument("make_dataset: test_every must be >= 2");
  if (!fs::is_directory(sharp_dir)) {
    throw std::invalid_argument("make_dataset: not a directory: " + sharp_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(sharp_dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("make_dataset: no images in " + sharp_dir.string());

  fs::create_directories(out_dir / "sharp");
  fs::create_directories(out_dir / "blurry");
  fs::create_directories(out_dir / "motion");

  Manifest rows;
  std::uint64_t image_index = 0;
  for (const auto& file : files) {
    diff::Tensor sharp;
    try {
      sharp = io::read_png(file);
    } catch (const std::exception& e) {
      spdlog::warn("make_dataset: skipping {}: {}", file.string(), e.what());
      continue;
    }
    const std::string stem = file.stem().string();
    const std::string sharp_rel = "sharp/" + stem + ".png";
    io::write_png(out_dir / sharp_rel, sharp);
    const bool test = image_index % opts.test_every == static_cast<std::uint64_t>(opts.test_every - 1);
    const std::uint64_t image_seed = mix_seed(seed ^ image_index);

    for (int k = 0; k < kernels_per_image; ++k) {
      const std::uint64_t sample_seed = mix_seed(image_seed + static_cast<std::uint64_t>(k));
      const std::size_t h = sharp.dim(1), w = sharp.dim(2);
      auto motion = opts.zero_motion ? MotionMap<float>::zeros(h, w, opts.synth.alpha)
                                     : synth_motion_field(sample_seed, h, w, opts.synth);
      diff::Tensor blurry;
      {
        diff::NoGradGuard guard;
        blurry = reblur(sharp, motion, opts.n_steps);
      }
      const std::string tag = stem + "_k" + std::to_string(k);
      ManifestRow row{sharp_rel, "blurry/" + tag + ".png", "motion/" + tag + ".mmap",
                      test ? "test" : "train", sample_seed};
      io::write_png(out_dir / row.blurry, blurry);
      io::write_motion_file(out_dir / row.motion, motion.field);
      rows.push_back(std::move(row));
    }
    ++image_index;
  }
  if (rows.empty()) throw std::invalid_argument("make_dataset: no readable images in " + sharp_dir.string());
  write_manifest(out_dir / kManifestName, rows);
  spdlog::info("make_dataset: {} images, {} samples -> {}", image_index, rows.size(), out_dir.string());
  return rows;
}

void write_manifest(const fs::path& file, const Manifest& rows) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write manifest " + file.string());
  for (const auto& r : rows) {
    os << r.sharp << '\t' << r.blurry << '\t' << r.motion << '\t' << r.split << '\t' << r.seed << '\n';
  }
  if (!os) throw std::runtime_error("write failed for manifest " + file.string());
}

Manifest load_manifest(const fs::path& dir) {
  const fs::path file = dir / kManifestName;
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot read manifest " + file.string());
  Manifest rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestRow r;
    std::string seed;
    if (!std::getline(ls, r.sharp, '\t') || !std::getline(ls, r.blurry, '\t') ||
        !std::getline(ls, r.motion, '\t') || !std::getline(ls, r.split, '\t') ||
        !std::getline(ls, seed)) {
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields");
    }
    r.sharp = (dir / r.sharp).string();
    r.blurry = (dir / r.blurry).string();
    r.motion = (dir / r.motion).string();
    r.seed = std::stoull(seed);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace neurmap::blur
