#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "neurmap/blur/dataset.hpp"
#include "neurmap/blur/procedural.hpp"
#include "neurmap/diff/tensor.hpp"
#include "neurmap/eval/flow.hpp"
#include "neurmap/eval/gradcheck_suite.hpp"
#include "neurmap/eval/report.hpp"
#include "neurmap/io/image_io.hpp"
#include "neurmap/io/motion_file.hpp"
#include "neurmap/train/inference.hpp"
#include "neurmap/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace neurmap;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  int threads = 1;
};

std::vector<fs::path> inputs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  auto files = blur::list_pngs(dir);
  if (files.empty()) throw std::runtime_error("no PNG files in " + dir);
  return files;
}

int run_synth(const Globals& g, const std::string& sharp_dir, int procedural, const std::string& size,
              const std::string& out, int kernels, blur::DatasetOptions opts) {
  fs::path source = sharp_dir;
  if (procedural > 0) {
    std::size_t h = 0, w = 0;
    if (std::sscanf(size.c_str(), "%zux%zu", &h, &w) != 2 || !h || !w)
      throw std::invalid_argument("synth: --size must look like 64x64");
    source = fs::path(out) / "source";
    blur::write_procedural_images(source, static_cast<std::size_t>(procedural), g.seed, h, w);
  } else if (sharp_dir.empty()) {
    throw std::invalid_argument("synth: give --sharp-dir or --procedural");
  }
  auto rows = blur::make_dataset(source, kernels, g.seed, out, opts);
  std::size_t test = 0;
  for (const auto& r : rows) test += r.split == "test";
  fmt::print("{} samples ({} train, {} test) in {}\n", rows.size(), rows.size() - test, test, out);
  return 0;
}

int run_train(const Globals& g, const std::vector<std::string>& overrides, const std::string& resume, long stop_at) {
  auto config = g.config.empty() ? train::TrainConfig{} : train::TrainConfig::load(g.config);
  if (g.seed_set) config.seed = g.seed;
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  train::TrainOptions opts;
  if (!resume.empty()) opts.resume = resume;
  opts.stop_at = stop_at;
  auto state = train::train(config, opts);
  fmt::print("trained to step {}; checkpoint {}\n", state.step, (fs::path(config.output_dir) / "final.nmck").string());
  return 0;
}

int run_deblur(const std::string& ckpt, const std::string& in, const std::string& out) {
  const auto nets = train::load_networks(ckpt);
  fs::create_directories(out);
  for (const auto& f : inputs(in)) io::write_png(fs::path(out) / f.filename(), train::deblur_image(nets, io::read_png(f)));
  return 0;
}

int run_motion(const std::string& ckpt, const std::string& in, const std::string& out) {
  const auto nets = train::load_networks(ckpt);
  fs::create_directories(out);
  for (const auto& f : inputs(in)) {
    const auto field = train::estimate_motion(nets, io::read_png(f));
    io::write_motion_file(fs::path(out) / (f.stem().string() + ".mmap"), field);
    io::write_png(fs::path(out) / (f.stem().string() + "_flow.png"),
                  eval::flow_to_color(field, std::nullopt, nets.config.weights.alpha));
  }
  return 0;
}

int run_score(const std::string& ckpt, const std::string& dataset, const std::string& split) {
  const auto s = train::score_split(train::load_networks(ckpt), dataset, split);
  fmt::print("split            {}\nsamples          {}\n", split, s.count);
  fmt::print("psnr_input_db    {:.4f}\npsnr_deblurred   {:.4f}\npsnr_gain_db     {:+.4f}\n", s.psnr_input,
             s.psnr_deblurred, s.psnr_gain());
  fmt::print("ssim_input       {:.5f}\nssim_deblurred   {:.5f}\n", s.ssim_input, s.ssim_deblurred);
  fmt::print("motion_mse_px2   {:.4f}\nrel_motion_mse   {:.4f}\nzero_field_mse   {:.4f}\n", s.motion_mse,
             s.relative_motion_mse, s.motion_mse_zero);
  fmt::print("mean_abs_m_b_px  {:.4f}\nmean_abs_m_s_px  {:.4f}\nmean_abs_m_rel   {:.4f}\n", s.magnitude_blurry,
             s.magnitude_sharp, s.magnitude_relative);
  return 0;
}

int run_eval(const eval::EvalPaths& paths, const std::string& csv) {
  const auto report = eval::evaluate_dirs(paths);
  std::cout << report.to_table();
  if (!csv.empty()) {
    std::ofstream os(csv);
    os << report.to_csv();
    if (!os) throw std::runtime_error("cannot write " + csv);
  } else {
    std::cout << "\n" << report.to_csv();
  }
  return 0;
}

int run_gradcheck() {
  bool ok = true;
  eval::run_gradcheck_suite([&](const eval::GradcheckOutcome& o) {
    ok &= o.passed();
    fmt::print("{:<16} max_rel {:.3e} (< {:.0e}, {} coords)  {}\n", o.name, o.result.max_rel_error, o.threshold,
               o.result.coords_checked, o.passed() ? "ok" : "FAIL");
  });
  fmt::print("{}\n", ok ? "all gradient checks passed" : "gradient checks FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NeurMAP blind motion deblurring: data synthesis, training, inference and evaluation"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--config", g.config, "Training configuration file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "Worker threads (accepted for compatibility; all work runs on one thread)")
      ->check(CLI::PositiveNumber);
  app.add_flag_callback("--quiet", [] { spdlog::set_level(spdlog::level::warn); }, "Only log warnings");

  auto* synth = app.add_subcommand("synth", "Build a blurred dataset from sharp images");
  std::string sharp_dir, synth_out, size = "64x64";
  int kernels = 6, procedural = 0;
  blur::DatasetOptions dopts;
  synth->add_option("--sharp-dir", sharp_dir, "Directory of sharp PNGs");
  synth->add_option("--procedural", procedural, "Generate this many procedural sharp scenes instead")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--size", size, "Size of procedural scenes, HxW")->capture_default_str();
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--kernels", kernels, "Motion fields per sharp image")->capture_default_str();
  synth->add_option("--alpha", dopts.synth.alpha, "Motion bound in pixels")->capture_default_str();
  synth->add_option("--segments", dopts.synth.n_segments, "Regional motion segments")->capture_default_str();
  synth->add_option("--smoothness", dopts.synth.smoothness, "Field smoothing in [0,1]")->capture_default_str();
  synth->add_option("--min-magnitude", dopts.synth.min_magnitude, "Smallest vector length")->capture_default_str();
  synth->add_option("--max-magnitude", dopts.synth.max_magnitude, "Largest vector length")->capture_default_str();
  synth->add_option("--n-steps", dopts.n_steps, "Reblur samples")->capture_default_str();
  synth->add_flag("--zero-motion", dopts.zero_motion, "Write blurry = sharp with zero motion");

  auto* trn = app.add_subcommand("train", "Train D, M and N (uses --config)");
  std::vector<std::string> overrides;
  std::string resume;
  long stop_at = -1;
  trn->add_option("--set", overrides, "Override a config key, key=value (repeatable)");
  trn->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  trn->add_option("--stop-at", stop_at, "Stop early at this step");

  std::string ckpt, in_dir, out_dir;
  auto* deb = app.add_subcommand("deblur", "Run the deblurrer over a directory of PNGs");
  deb->add_option("--checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  deb->add_option("--input-dir", in_dir, "Blurry PNGs")->required();
  deb->add_option("--output-dir", out_dir, "Where to write deblurred PNGs")->required();
  auto* mot = app.add_subcommand("motion", "Estimate motion maps (.mmap plus flow-colour PNG)");
  mot->add_option("--checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  mot->add_option("--input-dir", in_dir, "Input PNGs")->required();
  mot->add_option("--output-dir", out_dir, "Where to write motion files")->required();

  auto* ev = app.add_subcommand("eval", "PSNR, SSIM and motion error against ground truth");
  eval::EvalPaths paths;
  std::string csv;
  ev->add_option("--pred-dir", paths.pred_dir, "Predicted PNGs")->required();
  ev->add_option("--gt-dir", paths.gt_dir, "Ground-truth PNGs with the same names")->required();
  ev->add_option("--pred-motion-dir", paths.pred_motion_dir, "Predicted .mmap files");
  ev->add_option("--gt-motion-dir", paths.gt_motion_dir, "Ground-truth .mmap files");
  ev->add_option("--csv", csv, "Write the metric CSV here instead of stdout");

  auto* sc = app.add_subcommand("score", "Score a checkpoint on one split of a synthesized dataset");
  std::string dataset, split = "test";
  sc->add_option("--checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  sc->add_option("--dataset", dataset, "Directory written by synth")->required()->check(CLI::ExistingDirectory);
  sc->add_option("--split", split, "train or test")->capture_default_str();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable operation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  g.seed_set = seed_opt->count() > 0;
  try {
    if (*synth) return run_synth(g, sharp_dir, procedural, size, synth_out, kernels, dopts);
    if (*trn) return run_train(g, overrides, resume, stop_at);
    if (*deb) return run_deblur(ckpt, in_dir, out_dir);
    if (*mot) return run_motion(ckpt, in_dir, out_dir);
    if (*ev) return run_eval(paths, csv);
    if (*sc) return run_score(ckpt, dataset, split);
    if (*gc) return run_gradcheck();
  } catch (const std::exception& e) {
    std::cerr << "neurmap: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
