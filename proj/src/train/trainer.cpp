#include "neurmap/train/trainer.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <set>
#include <stdexcept>

#include "neurmap/blur/dataset.hpp"
#include "neurmap/blur/reblur.hpp"
#include "neurmap/diff/graph.hpp"
#include "neurmap/diff/ops.hpp"
#include "neurmap/eval/flow.hpp"
#include "neurmap/io/image_io.hpp"

namespace neurmap::train {

namespace fs = std::filesystem;
using diff::Shape;
using diff::Tensor;

namespace {

std::vector<Tensor> read_all(const std::vector<fs::path>& files) {
  std::vector<Tensor> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(io::read_png(f));
  return out;
}

bool is_dataset(const fs::path& dir) { return fs::exists(dir / blur::kManifestName); }

std::vector<blur::ManifestRow> train_rows(const fs::path& dir) {
  std::vector<blur::ManifestRow> rows;
  for (auto& r : blur::load_manifest(dir))
    if (r.split == "train") rows.push_back(std::move(r));
  return rows;
}

std::vector<Tensor> unpaired_set(const std::string& dir, bool blurry_side) {
  if (dir.empty()) throw std::invalid_argument(blurry_side ? "config: blurry_dir is not set" : "config: sharp_dir is not set");
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> files;
  if (is_dataset(dir)) {
    std::set<std::string> seen;
    for (const auto& r : train_rows(dir)) {
      const auto& p = blurry_side ? r.blurry : r.sharp;
      if (seen.insert(p).second) files.emplace_back(p);
    }
  } else {
    files = blur::list_pngs(dir);
  }
  if (files.empty()) throw std::runtime_error("no training images in " + dir);
  return read_all(files);
}

void check_size(const std::vector<Tensor>& set, const TrainConfig& c, const char* what) {
  const std::size_t m = std::size_t{1} << c.arch.levels;
  for (const auto& t : set) {
    if (c.crop > 0 && (t.dim(1) < std::size_t(c.crop) || t.dim(2) < std::size_t(c.crop)))
      throw std::invalid_argument(fmt::format("{} image {}x{} is smaller than crop {}", what, t.dim(1), t.dim(2), c.crop));
    if (c.crop == 0 && (t.dim(1) % m || t.dim(2) % m))
      throw std::invalid_argument(fmt::format("{} image {}x{} is not divisible by {}; set crop", what, t.dim(1), t.dim(2), m));
  }
}

template <typename T>
diff::ParameterSet<T> copy_params(const diff::ParameterSet<T>& p) {
  auto c = p.clone();
  for (auto& it : c.items()) it.value.set_requires_grad(true);
  return c;
}

struct Snapshot {
  diff::ParameterSet<float> d, m, n;
  diff::AdamState<float> adam_d, adam_m, adam_n;

  explicit Snapshot(const TrainState& s)
      : d(copy_params(s.d.params)), m(copy_params(s.m.params)), n(copy_params(s.n.params)),
        adam_d(s.adam_d), adam_m(s.adam_m), adam_n(s.adam_n) {}

  void restore(TrainState& s) {
    s.d.params = d;
    s.m.params = m;
    s.n.params = n;
    s.adam_d = adam_d;
    s.adam_m = adam_m;
    s.adam_n = adam_n;
  }
};

}  // namespace

TrainData load_train_data(const TrainConfig& config) {
  TrainData data;
  data.blurry = unpaired_set(config.blurry_dir, true);
  data.sharp = unpaired_set(config.sharp_dir, false);
  check_size(data.blurry, config, "blurry");
  check_size(data.sharp, config, "sharp");
  if (config.unsupervised) return data;
  if (config.paired_dir.empty()) throw std::invalid_argument("config: paired_dir is not set (or set unsupervised)");
  if (!is_dataset(config.paired_dir))
    throw std::runtime_error("paired_dir needs a dataset manifest: " + config.paired_dir);
  std::vector<fs::path> b, s;
  for (const auto& r : train_rows(config.paired_dir)) {
    b.emplace_back(r.blurry);
    s.emplace_back(r.sharp);
  }
  if (b.empty()) throw std::runtime_error("no paired training samples in " + config.paired_dir);
  data.paired_blurry = read_all(b);
  data.paired_sharp = read_all(s);
  for (std::size_t i = 0; i < b.size(); ++i)
    if (data.paired_blurry[i].shape() != data.paired_sharp[i].shape())
      throw std::runtime_error("paired sample size mismatch: " + b[i].string());
  check_size(data.paired_blurry, config, "paired");
  return data;
}

Tensor crop_flip(const Tensor& image, std::size_t y0, std::size_t x0, std::size_t size, bool flip) {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (y0 + size > h || x0 + size > w) throw std::invalid_argument("crop_flip: window outside the image");
  std::vector<float> out(c * size * size);
  const auto v = image.values();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const std::size_t sx = flip ? x0 + size - 1 - x : x0 + x;
        out[(ch * size + y) * size + x] = v[(ch * h + y0 + y) * w + sx];
      }
  return Tensor(Shape{c, size, size}, std::move(out));
}

Batches sample_batches(const TrainData& data, const TrainConfig& config, std::mt19937_64& rng) {
  auto draw = [&](const std::vector<Tensor>* a, const std::vector<Tensor>* b, std::vector<Tensor>& oa,
                  std::vector<Tensor>* ob) {
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, a->size() - 1)(rng);
    const Tensor& img = (*a)[i];
    if (config.crop == 0) {
      oa.push_back(img);
      if (ob) ob->push_back((*b)[i]);
      return;
    }
    const std::size_t c = static_cast<std::size_t>(config.crop);
    const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, img.dim(1) - c)(rng);
    const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, img.dim(2) - c)(rng);
    const bool flip = config.flip && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    oa.push_back(crop_flip(img, y0, x0, c, flip));
    if (ob) ob->push_back(crop_flip((*b)[i], y0, x0, c, flip));
  };
  Batches out;
  for (int k = 0; k < config.unpaired_batch; ++k) draw(&data.blurry, nullptr, out.unpaired.blurry, nullptr);
  for (int k = 0; k < config.unpaired_batch; ++k) draw(&data.sharp, nullptr, out.unpaired.sharp, nullptr);
  if (!config.unsupervised && !data.paired_blurry.empty()) {
    out.paired.emplace();
    for (int k = 0; k < config.paired_batch; ++k)
      draw(&data.paired_blurry, &data.paired_sharp, out.paired->blurry, &out.paired->sharp);
  }
  return out;
}

StepResult train_step(TrainState& state, const loss::PairedBatch<float>* paired,
                      loss::UnpairedBatch<float>& unpaired, const StepObserver& observer) {
  const auto& cfg = state.config;
  const auto opt = cfg.objective_options();
  const long total = cfg.total_steps;
  const long step = state.step;
  Snapshot snapshot(state);
  StepResult res;
  auto abort = [&](const char* which) {
    spdlog::warn("step {}: non-finite {} in the {} update, step skipped; terms: {}", step,
                 res.report.all_finite() ? "gradient" : "loss", which, res.report.summary());
    snapshot.restore(state);
    res.applied = false;
    ++state.step;
    return res;
  };
  auto update = [&](diff::ParameterSet<float>& params, diff::AdamState<float>& adam, double lr0,
                    const loss::Objective<float>& obj) {
    res.report.merge(obj.report);
    if (!obj.report.all_finite() || !std::isfinite(obj.total.item())) return false;
    params.zero_grad();
    diff::backward(obj.total);
    const bool ok = diff::adam_step(params, adam, lr_at(step, lr0, total));
    params.zero_grad();
    return ok;
  };

  const loss::Networks<float> nets{&state.d, &state.m, &state.n};
  if (opt.switches.natural && opt.weights.beta > 0) {
    if (!update(state.n.params, state.adam_n, cfg.lr_n, loss::objective_N(unpaired, nets, opt)))
      return abort("discriminator");
    if (observer) observer(SubUpdate::Discriminator, state);
  }
  if (!update(state.m.params, state.adam_m, cfg.lr_m, loss::objective_M(unpaired, nets, opt))) return abort("motion");
  if (observer) observer(SubUpdate::Motion, state);
  if (!update(state.d.params, state.adam_d, cfg.lr_d, loss::objective_D(unpaired, paired, nets, opt)))
    return abort("deblur");
  if (observer) observer(SubUpdate::Deblur, state);
  ++state.step;
  return res;
}

namespace {

Tensor hconcat(const std::vector<Tensor>& panels) {
  const std::size_t h = panels[0].dim(1);
  std::size_t w = 0;
  for (const auto& p : panels) w += p.dim(2);
  std::vector<float> out(3 * h * w);
  std::size_t x0 = 0;
  for (const auto& p : panels) {
    const std::size_t pw = p.dim(2);
    const auto v = p.values();
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < pw; ++x) out[(c * h + y) * w + x0 + x] = v[(c * h + y) * pw + x];
    x0 += pw;
  }
  return Tensor(Shape{3, h, w}, std::move(out));
}

void write_sample_grid(const TrainState& s, const Tensor& blurry, const fs::path& path) {
  diff::NoGradGuard guard;
  const auto deblurred = nets::deblur_forward(s.d, blurry);
  const auto m_b = nets::motion_forward(s.m, blurry);
  const auto rel = blur::relative_motion(m_b, nets::motion_forward(s.m, deblurred));
  const auto reblurred = blur::reblur(deblurred, rel, s.config.n_steps);
  io::write_png(path, hconcat({blurry, deblurred, reblurred, eval::flow_to_color(m_b.field, s.config.weights.alpha)}));
}

std::string strip_paths(TrainConfig c) {
  c.paired_dir = c.blurry_dir = c.sharp_dir = c.output_dir = "";
  return c.to_text();
}

}  // namespace

TrainState train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  const TrainData data = load_train_data(config);
  TrainState state = TrainState::initial(config);
  if (options.resume) {
    state = load_checkpoint(*options.resume);
    if (strip_paths(state.config) != strip_paths(config))
      throw std::invalid_argument("resume: checkpoint was written with a different training configuration");
    state.config = config;
    spdlog::info("resuming from {} at step {}", options.resume->string(), state.step);
  }
  const long stop = options.stop_at < 0 ? config.total_steps : std::min(options.stop_at, config.total_steps);

  const fs::path out = config.output_dir;
  fs::create_directories(out / "checkpoints");
  if (config.sample_every > 0) fs::create_directories(out / "samples");
  const auto log_path = out / "loss.csv";
  const bool append = options.resume && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());
  if (!append) log << loss::LossReport::csv_header() << "\n";

  const Tensor preview = data.blurry.front();
  spdlog::info("training {} -> {} steps: {} blurry, {} sharp, {} paired", state.step, stop, data.blurry.size(),
               data.sharp.size(), data.paired_blurry.size());
  while (state.step < stop) {
    auto batches = sample_batches(data, config, state.rng);
    const long step = state.step;
    const double lr = lr_at(step, config.lr_d, config.total_steps);
    auto res = train_step(state, batches.paired ? &*batches.paired : nullptr, batches.unpaired);
    log << res.report.csv_row(step, lr) << "\n";
    if (config.log_every > 0 && (step % config.log_every == 0 || state.step == stop))
      spdlog::info("step {} lr_D {:.3g} {}", step, lr, res.report.summary());
    if (config.sample_every > 0 && state.step % config.sample_every == 0) {
      const std::size_t m = std::size_t{1} << config.arch.levels;
      const std::size_t h = preview.dim(1) / m * m, w = preview.dim(2) / m * m;
      write_sample_grid(state, crop_flip(preview, 0, 0, std::min(h, w), false),
                        out / "samples" / fmt::format("step_{:06d}.png", state.step));
    }
    if (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0) {
      log.flush();
      save_checkpoint(state, out / "checkpoints" / fmt::format("step_{:06d}.nmck", state.step));
    }
  }
  log.flush();
  if (!log) throw std::runtime_error("write failed for " + log_path.string());
  save_checkpoint(state, out / "final.nmck");
  return state;
}

}  // namespace neurmap::train
