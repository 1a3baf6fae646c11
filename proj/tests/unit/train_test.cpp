#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "neurmap/blur/dataset.hpp"
#include "neurmap/blur/procedural.hpp"
#include "neurmap/eval/metrics.hpp"
#include "neurmap/io/image_io.hpp"
#include "neurmap/io/motion_file.hpp"
#include "neurmap/train/inference.hpp"
#include "neurmap/train/trainer.hpp"

namespace fs = std::filesystem;
namespace nt = neurmap::train;
namespace nb = neurmap::blur;
using neurmap::diff::Shape;
using neurmap::diff::Tensor;

namespace {

// Twelve 32x32 scenes, two fields each, for both the unpaired and the paired set.
const fs::path& fixture() {
  static const fs::path root = [] {
    auto dir = fs::temp_directory_path() / "neurmap_train_fixture";
    fs::remove_all(dir);
    nb::write_procedural_images(dir / "scenes", 12, 3, 32, 32);
    nb::write_procedural_images(dir / "scenes_paired", 6, 4, 32, 32);
    nb::DatasetOptions opts;
    opts.synth.max_magnitude = 6;
    nb::make_dataset(dir / "scenes", 2, 5, dir / "unpaired", opts);
    opts.synth.n_segments = 0;
    nb::make_dataset(dir / "scenes_paired", 2, 6, dir / "paired", opts);
    return dir;
  }();
  return root;
}

nt::TrainConfig tiny_config(const std::string& out) {
  nt::TrainConfig c;
  c.blurry_dir = c.sharp_dir = (fixture() / "unpaired").string();
  c.paired_dir = (fixture() / "paired").string();
  c.output_dir = (fs::temp_directory_path() / out).string();
  c.crop = 16;
  c.arch.levels = 1;
  c.arch.base_channels = 4;
  c.arch.patch_levels = 2;
  c.total_steps = 40;
  c.checkpoint_every = 0;
  c.sample_every = 0;
  c.log_every = 0;
  c.n_steps = 5;
  return c;
}

std::vector<float> flat(const neurmap::diff::ParameterSet<float>& p) {
  std::vector<float> out;
  for (const auto& it : p.items()) out.insert(out.end(), it.value.values().begin(), it.value.values().end());
  return out;
}

// Checkpoint bytes with the output directory echo normalized, for
// comparing runs written to different places.
std::string checkpoint_bytes(const fs::path& p) {
  auto s = nt::load_checkpoint(p);
  s.config.output_dir = "run";
  return nt::serialize_checkpoint(s);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(LearningRate, LinearDecayToZero) {
  EXPECT_EQ(nt::lr_at(0, 1e-4, 100), 1e-4);
  EXPECT_EQ(nt::lr_at(100, 1e-4, 100), 0.0);
  EXPECT_DOUBLE_EQ(nt::lr_at(50, 1e-4, 100), 5e-5);
  EXPECT_THROW(nt::lr_at(101, 1e-4, 100), std::out_of_range);
  EXPECT_THROW(nt::lr_at(-1, 1e-4, 100), std::out_of_range);
}

TEST(TrainConfig, TextRoundTripIsExact) {
  nt::TrainConfig c;
  c.lr_d = 1.0 / 3.0;
  c.seed = 0xffffffffffffULL;
  c.disable_tv = true;
  c.blurry_dir = "some/dir";
  const auto text = c.to_text();
  EXPECT_EQ(nt::TrainConfig::parse(text).to_text(), text);
  EXPECT_EQ(nt::TrainConfig::parse(text).lr_d, c.lr_d);
}

TEST(TrainConfig, ParsesCommentsAndRejectsUnknownKeys) {
  auto c = nt::TrainConfig::parse("# run\n lambda = 50  # weight\n\nbeta=0.5\ncrop = 32\n");
  EXPECT_EQ(c.weights.lambda, 50);
  EXPECT_EQ(c.weights.beta, 0.5);
  EXPECT_EQ(c.crop, 32);
  EXPECT_THROW(nt::TrainConfig::parse("lamda = 50\n"), std::invalid_argument);
  EXPECT_THROW(nt::TrainConfig::parse("crop = 3x\n"), std::invalid_argument);
  EXPECT_THROW(nt::TrainConfig::parse("flip = maybe\n"), std::invalid_argument);
  EXPECT_THROW(nt::TrainConfig::parse("crop 32\n"), std::invalid_argument);
}

TEST(TrainConfig, DefaultsAndValidation) {
  nt::TrainConfig c;
  EXPECT_EQ(c.lr_d, 5e-5);
  EXPECT_EQ(c.lr_m, 1e-4);
  EXPECT_EQ(c.lr_n, 1e-4);
  EXPECT_EQ(c.weights.lambda, 100);
  EXPECT_EQ(c.weights.beta, 0.1);
  EXPECT_EQ(c.weights.alpha, 40);
  EXPECT_EQ(c.n_steps, 15);
  EXPECT_NO_THROW(c.validate());
  c.crop = 44;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.crop = 48;
  c.lr_m = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainConfig, MotionBoundIsIndependentOfAlpha) {
  auto c = nt::TrainConfig::parse("alpha = 20\nmotion_bound = 60\n");
  EXPECT_EQ(c.weights.alpha, 20);
  EXPECT_EQ(c.arch.alpha, 60);
  EXPECT_NO_THROW(c.validate());
  c.arch.alpha = 10;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Data, CropFlipMirrorsWindow) {
  std::vector<float> v(2 * 3 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = float(i);
  Tensor t(Shape{2, 3, 4}, v);
  auto c = nt::crop_flip(t, 1, 1, 2, false);
  EXPECT_EQ(std::vector<float>(c.values().begin(), c.values().end()), (std::vector<float>{5, 6, 9, 10, 17, 18, 21, 22}));
  auto f = nt::crop_flip(t, 1, 1, 2, true);
  EXPECT_EQ(std::vector<float>(f.values().begin(), f.values().end()), (std::vector<float>{6, 5, 10, 9, 18, 17, 22, 21}));
}

TEST(Data, LoadsTrainRowsOnly) {
  auto data = nt::load_train_data(tiny_config("neurmap_t_load"));
  EXPECT_EQ(data.blurry.size(), 20u);  // 10 train scenes x 2 fields
  EXPECT_EQ(data.sharp.size(), 10u);
  EXPECT_EQ(data.paired_blurry.size(), 10u);  // 5 train scenes x 2
  EXPECT_EQ(data.paired_sharp.size(), 10u);
}

TEST(Data, EmptyDatasetRejected) {
  auto c = tiny_config("neurmap_t_empty");
  auto empty = fs::temp_directory_path() / "neurmap_empty_dir";
  fs::create_directories(empty);
  c.sharp_dir = empty.string();
  EXPECT_THROW(nt::load_train_data(c), std::runtime_error);
  c = tiny_config("neurmap_t_empty");
  c.paired_dir.clear();
  EXPECT_THROW(nt::load_train_data(c), std::invalid_argument);
  c.unsupervised = true;
  EXPECT_NO_THROW(nt::load_train_data(c));
}

class TrainStepTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config = tiny_config("neurmap_t_step");
    state = nt::TrainState::initial(config);
    data = nt::load_train_data(config);
    batches = nt::sample_batches(data, config, state.rng);
  }
  nt::TrainConfig config;
  nt::TrainState state;
  nt::TrainData data;
  nt::Batches batches;
};

TEST_F(TrainStepTest, UpdatesOnlyTheDesignatedNetwork) {
  // Two steps so the heads are non-zero and every network gets gradients.
  for (int k = 0; k < 3; ++k) {
    auto d0 = flat(state.d.params), m0 = flat(state.m.params), n0 = flat(state.n.params);
    std::vector<nt::SubUpdate> order;
    nt::train_step(state, &*batches.paired, batches.unpaired, [&](nt::SubUpdate u, const nt::TrainState& s) {
      order.push_back(u);
      const auto d = flat(s.d.params), m = flat(s.m.params), n = flat(s.n.params);
      switch (u) {
        case nt::SubUpdate::Discriminator:
          EXPECT_NE(n, n0);
          EXPECT_EQ(m, m0);
          EXPECT_EQ(d, d0);
          break;
        case nt::SubUpdate::Motion:
          EXPECT_NE(m, m0);
          EXPECT_EQ(d, d0);
          break;
        case nt::SubUpdate::Deblur:
          EXPECT_NE(d, d0);
          break;
      }
      d0 = d, m0 = m, n0 = n;
    });
    EXPECT_EQ(order, (std::vector<nt::SubUpdate>{nt::SubUpdate::Discriminator, nt::SubUpdate::Motion,
                                                  nt::SubUpdate::Deblur}));
    batches = nt::sample_batches(data, config, state.rng);
  }
  EXPECT_EQ(state.step, 3);
}

TEST_F(TrainStepTest, ZeroLearningRatesChangeNothingButTheCounter) {
  state.config.lr_d = state.config.lr_m = state.config.lr_n = 0;
  auto d0 = flat(state.d.params), m0 = flat(state.m.params), n0 = flat(state.n.params);
  auto res = nt::train_step(state, &*batches.paired, batches.unpaired);
  EXPECT_TRUE(res.applied);
  EXPECT_EQ(flat(state.d.params), d0);
  EXPECT_EQ(flat(state.m.params), m0);
  EXPECT_EQ(flat(state.n.params), n0);
  EXPECT_EQ(state.step, 1);
}

TEST_F(TrainStepTest, ReportCoversAllTermsAndContent) {
  auto res = nt::train_step(state, &*batches.paired, batches.unpaired);
  for (const char* name : neurmap::loss::LossReport::kNames) EXPECT_TRUE(res.report.has(name)) << name;
}

TEST_F(TrainStepTest, DisabledReblurIsAbsentFromReport) {
  state.config.disable_reblur_d = state.config.disable_reblur_m = true;
  auto res = nt::train_step(state, &*batches.paired, batches.unpaired);
  EXPECT_FALSE(res.report.has("reblur"));
  EXPECT_TRUE(res.report.has("tv_rel"));
}

TEST_F(TrainStepTest, NonFiniteLossAbortsAndRestores) {
  nt::train_step(state, &*batches.paired, batches.unpaired);  // non-trivial Adam state first
  batches = nt::sample_batches(data, config, state.rng);
  const auto before = nt::serialize_checkpoint(state);
  batches.unpaired.blurry[0].mutable_values()[7] = NAN;
  auto res = nt::train_step(state, &*batches.paired, batches.unpaired);
  EXPECT_FALSE(res.applied);
  EXPECT_EQ(state.step, 2);
  state.step = 1;
  EXPECT_EQ(nt::serialize_checkpoint(state), before);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  auto config = tiny_config("neurmap_t_ckpt");
  auto state = nt::TrainState::initial(config);
  auto data = nt::load_train_data(config);
  for (int k = 0; k < 2; ++k) {
    auto b = nt::sample_batches(data, config, state.rng);
    nt::train_step(state, &*b.paired, b.unpaired);
  }
  fs::create_directories(config.output_dir);
  const auto path = fs::path(config.output_dir) / "a.nmck";
  nt::save_checkpoint(state, path);
  auto loaded = nt::load_checkpoint(path);
  EXPECT_EQ(flat(loaded.d.params), flat(state.d.params));
  EXPECT_EQ(flat(loaded.m.params), flat(state.m.params));
  EXPECT_EQ(flat(loaded.n.params), flat(state.n.params));
  EXPECT_EQ(loaded.adam_m.t, state.adam_m.t);
  EXPECT_EQ(loaded.step, 2);
  EXPECT_TRUE(loaded.rng == state.rng);
  nt::save_checkpoint(loaded, fs::path(config.output_dir) / "b.nmck");
  EXPECT_EQ(slurp(path), slurp(fs::path(config.output_dir) / "b.nmck"));
  EXPECT_EQ(slurp(path).substr(0, 4), "NMCK");
}

TEST(Checkpoint, CorruptFilesRejected) {
  auto state = nt::TrainState::initial(tiny_config("neurmap_t_corrupt"));
  auto bytes = nt::serialize_checkpoint(state);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(nt::deserialize_checkpoint(bad_magic), std::runtime_error);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(nt::deserialize_checkpoint(bad_version), std::runtime_error);
  EXPECT_THROW(nt::deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), std::runtime_error);
  EXPECT_THROW(nt::deserialize_checkpoint(bytes + "x"), std::runtime_error);
  EXPECT_NO_THROW(nt::deserialize_checkpoint(bytes));
}

TEST(Train, ZeroStepsWritesInitialCheckpoint) {
  auto config = tiny_config("neurmap_t_zero");
  config.total_steps = 0;
  fs::remove_all(config.output_dir);
  auto state = nt::train(config);
  EXPECT_EQ(state.step, 0);
  auto loaded = nt::load_checkpoint(fs::path(config.output_dir) / "final.nmck");
  EXPECT_EQ(nt::serialize_checkpoint(loaded), nt::serialize_checkpoint(nt::TrainState::initial(config)));
}

TEST(Train, SameSeedGivesIdenticalLossStreams) {
  auto a = tiny_config("neurmap_t_det_a"), b = tiny_config("neurmap_t_det_b");
  a.total_steps = b.total_steps = 200;
  a.sample_every = b.sample_every = 100;
  nt::train(a);
  nt::train(b);
  const auto la = slurp(fs::path(a.output_dir) / "loss.csv"), lb = slurp(fs::path(b.output_dir) / "loss.csv");
  EXPECT_EQ(std::count(la.begin(), la.end(), '\n'), 201);
  EXPECT_EQ(la, lb);
  EXPECT_EQ(checkpoint_bytes(fs::path(a.output_dir) / "final.nmck"),
            checkpoint_bytes(fs::path(b.output_dir) / "final.nmck"));
  EXPECT_TRUE(fs::exists(fs::path(a.output_dir) / "samples" / "step_000200.png"));
}

TEST(Train, ResumeEqualsUninterruptedRun) {
  auto a = tiny_config("neurmap_t_resume_a"), b = tiny_config("neurmap_t_resume_b");
  a.checkpoint_every = b.checkpoint_every = 10;
  fs::remove_all(a.output_dir);
  fs::remove_all(b.output_dir);
  nt::train(a, {std::nullopt, 30});
  nt::train(b, {std::nullopt, 20});
  nt::train(b, {fs::path(b.output_dir) / "checkpoints" / "step_000020.nmck", 30});
  EXPECT_EQ(checkpoint_bytes(fs::path(a.output_dir) / "final.nmck"),
            checkpoint_bytes(fs::path(b.output_dir) / "final.nmck"));
  EXPECT_EQ(slurp(fs::path(a.output_dir) / "loss.csv"), slurp(fs::path(b.output_dir) / "loss.csv"));
  auto changed = b;
  changed.weights.beta = 0.5;
  EXPECT_THROW(nt::train(changed, {fs::path(b.output_dir) / "final.nmck", 40}), std::invalid_argument);
}

TEST(Inference, PadReplicatesEdgesAndCropInverts) {
  Tensor t(Shape{1, 2, 3}, {1, 2, 3, 4, 5, 6});
  auto p = nt::pad_to_multiple(t, 4);
  ASSERT_EQ(p.shape(), (Shape{1, 4, 4}));
  const std::vector<float> want{1, 2, 3, 3, 4, 5, 6, 6, 4, 5, 6, 6, 4, 5, 6, 6};
  EXPECT_EQ(std::vector<float>(p.values().begin(), p.values().end()), want);
  auto back = nt::crop_to(p, 2, 3);
  EXPECT_EQ(std::vector<float>(back.values().begin(), back.values().end()),
            std::vector<float>(t.values().begin(), t.values().end()));
  EXPECT_THROW(nt::crop_to(t, 3, 3), std::invalid_argument);
}

TEST(Inference, InitialNetworksScoreAsIdentityAndZeroField) {
  auto config = tiny_config("neurmap_t_score");
  config.total_steps = 0;
  fs::remove_all(config.output_dir);
  nt::train(config);
  const auto nets = nt::load_networks(fs::path(config.output_dir) / "final.nmck");
  const auto s = nt::score_split(nets, fixture() / "unpaired");
  double psnr = 0, zero = 0;
  std::size_t rows = 0;
  for (const auto& row : nb::load_manifest(fixture() / "unpaired")) {
    if (row.split != "test") continue;
    const auto gt = neurmap::io::read_motion_file(row.motion);
    psnr += neurmap::eval::psnr(neurmap::io::read_png(row.blurry), neurmap::io::read_png(row.sharp));
    zero += neurmap::eval::motion_mse_sign_invariant(Tensor(gt.shape()), gt);
    ++rows;
  }
  ASSERT_EQ(s.count, rows);
  EXPECT_GT(rows, 0u);
  EXPECT_NEAR(s.psnr_input, psnr / rows, 1e-9);
  EXPECT_NEAR(s.psnr_deblurred, s.psnr_input, 1e-9);
  EXPECT_NEAR(s.motion_mse_zero, zero / rows, 1e-9);
  EXPECT_EQ(s.motion_mse, s.motion_mse_zero);
  EXPECT_EQ(s.relative_motion_mse, s.motion_mse_zero);
  EXPECT_EQ(s.magnitude_blurry, 0);
  EXPECT_EQ(s.magnitude_sharp, 0);
  EXPECT_THROW(nt::score_split(nets, fixture() / "unpaired", "validation"), std::runtime_error);
}
