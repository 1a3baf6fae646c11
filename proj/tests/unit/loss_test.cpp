#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "neurmap/diff/gradcheck.hpp"
#include "neurmap/diff/graph.hpp"
#include "neurmap/diff/ops.hpp"
#include "neurmap/loss/objectives.hpp"
#include "support/oracles.hpp"

namespace nl = neurmap::loss;
namespace nn = neurmap::nets;
namespace nb = neurmap::blur;
namespace nd = neurmap::diff;
using nd::Shape;
using nd::Tensor;
using nd::Tensor64;
using neurmap::testing::random_values;
using Motion = nb::MotionMap<float>;

namespace {

Tensor random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Tensor(Shape{3, h, w}, random_values<float>(3 * h * w, rng, 0.05, 0.95));
}

Motion constant_motion(std::size_t h, std::size_t w, float u, float v) {
  return Motion::uniform(h, w, u, v);
}

nn::ArchConfig tiny_arch() {
  nn::ArchConfig a;
  a.levels = 1;
  a.base_channels = 4;
  a.patch_levels = 2;
  return a;
}

template <typename T>
void randomize_heads(nn::NetParams<T>& net, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (auto& it : net.params.items())
    if (it.name.rfind("head", 0) == 0)
      for (auto& v : it.value.mutable_values()) v = static_cast<T>(d(rng));
}

template <typename T>
struct TinySetup {
  nn::NetParams<T> d, m, n;
  nl::UnpairedBatch<T> batch;
  nl::PairedBatch<T> paired;

  nl::Networks<T> nets() const { return {&d, &m, &n}; }
};

template <typename T>
TinySetup<T> tiny_setup(std::uint64_t seed) {
  TinySetup<T> s;
  s.d = nn::init_params(tiny_arch(), nn::Role::Deblur, seed).template cast<T>();
  s.m = nn::init_params(tiny_arch(), nn::Role::Motion, seed).template cast<T>();
  s.n = nn::init_params(tiny_arch(), nn::Role::Discriminator, seed).template cast<T>();
  randomize_heads(s.d, seed + 1, 0.05);
  randomize_heads(s.m, seed + 2, 0.3);
  std::mt19937_64 rng(seed + 3);
  auto img = [&] {
    return nd::BasicTensor<T>(Shape{3, 16, 16}, random_values<T>(768, rng, 0.1, 0.9));
  };
  s.batch.blurry = {img(), img()};
  s.batch.sharp = {img(), img()};
  s.paired.blurry = {img()};
  s.paired.sharp = {img()};
  return s;
}

bool any_grad(const nn::NetParams<float>& net) {
  for (const auto& it : net.params.items()) {
    if (!it.value.has_grad()) continue;
    for (float g : it.value.grad())
      if (g != 0.f) return true;
  }
  return false;
}

}  // namespace

// ---- reblur loss --------------------------------------------------------------

TEST(LossReblur, ZeroWhenBlurryIsReblurOfEstimate) {
  auto s = random_image(12, 12, 1);
  auto m = constant_motion(12, 12, 3.f, -2.f);
  auto b = nb::reblur(s, m, 15);
  EXPECT_EQ(nl::loss_reblur(b, s, m, 15).item(), 0.f);
}

TEST(LossReblur, ZeroForIdentityReblur) {
  auto b = random_image(8, 8, 2);
  EXPECT_EQ(nl::loss_reblur(b, b, Motion::zeros(8, 8), 15).item(), 0.f);
}

TEST(LossReblur, ConstantMse) {
  Tensor b(Shape{3, 6, 6}, 0.f), s(Shape{3, 6, 6}, 0.5f);
  EXPECT_NEAR(nl::loss_reblur(b, s, Motion::zeros(6, 6), 15).item(), 0.25, 1e-6);
}

TEST(LossReblur, RejectsShapeMismatch) {
  EXPECT_THROW(nl::loss_reblur(random_image(8, 8, 1), random_image(8, 6, 1), Motion::zeros(8, 6), 15),
               std::invalid_argument);
}

// ---- kernel prior -------------------------------------------------------------

TEST(KernelPrior, TermValues) {
  auto m_b = constant_motion(4, 4, 10.f, -10.f);
  auto t = nl::loss_kernel_prior(m_b, Motion::zeros(4, 4), m_b, m_b, 40.0);
  EXPECT_NEAR(t.m_b.item(), 30.0, 1e-6);
  EXPECT_EQ(t.m_s.item(), 0.f);
  EXPECT_EQ(t.m_shat.item(), 0.f);
  EXPECT_NEAR(t.total().item(), 30.0, 1e-6);
}

TEST(KernelPrior, MagnitudeTermEqualsDistanceOfMagnitudeToAlpha) {
  std::mt19937_64 rng(3);
  auto v = random_values<float>(2 * 25, rng, -39, 39);
  Motion m(Tensor(Shape{2, 5, 5}, v), 40);
  double ref = 0;
  for (float x : v) ref += std::abs(std::abs(x) - 40.0);
  EXPECT_NEAR(nl::loss_magnitude_prior(m, 40.0).item(), ref / v.size(), 1e-5);
}

TEST(KernelPrior, ZeroMapIsPushedOffZero) {
  Tensor f(Shape{2, 3, 3});
  f.set_requires_grad(true);
  nd::backward(nl::loss_magnitude_prior(Motion(f, 40), 40.0));
  for (float g : f.grad()) EXPECT_LT(g, 0.f);
}

TEST(KernelPrior, DetachedReferenceGetsNoGradient) {
  Tensor a(Shape{2, 3, 3}, 1.f), b(Shape{2, 3, 3}, 2.f);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  auto t = nl::loss_kernel_prior(Motion(a, 40), Motion::zeros(3, 3), Motion(b, 40), Motion(a, 40), 40.0);
  nd::backward(t.m_shat);
  EXPECT_TRUE(b.has_grad());
  EXPECT_FALSE(a.has_grad());
}

// ---- TV -----------------------------------------------------------------------

TEST(LossTv, ConstantIsZero) { EXPECT_EQ(nl::loss_tv(constant_motion(5, 7, 3.f, -1.f)).item(), 0.f); }

TEST(LossTv, HandEvaluatedTwoByTwo) {
  Motion m(Tensor(Shape{2, 2, 2}, {0, 0, 1, 1, 0, 0, 0, 0}), 40);
  EXPECT_NEAR(nl::loss_tv(m).item(), 1.0, 1e-6);
}

TEST(LossTv, DegenerateIsZero) { EXPECT_EQ(nl::loss_tv(constant_motion(1, 1, 5.f, 5.f)).item(), 0.f); }

TEST(LossTv, HomogeneousAndShiftInvariant) {
  std::mt19937_64 rng(4);
  Tensor f(Shape{2, 6, 5}, random_values<float>(60, rng, -5, 5));
  const double tv = nl::loss_tv(Motion(f, 40)).item();
  EXPECT_NEAR(nl::loss_tv(Motion(nd::scale(f, -2.5f), 40)).item(), 2.5 * tv, 1e-5);
  EXPECT_NEAR(nl::loss_tv(Motion(nd::add_scalar(f, 7.f), 40)).item(), tv, 1e-5);
}

TEST(LossTv, MatchesDirectSummation) {
  std::mt19937_64 rng(5);
  const std::size_t h = 4, w = 6;
  auto v = random_values<float>(2 * h * w, rng, -3, 3);
  double ref = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    double sx = 0, sy = 0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x + 1 < w; ++x) sx += std::abs(v[(c * h + y) * w + x + 1] - v[(c * h + y) * w + x]);
    for (std::size_t y = 0; y + 1 < h; ++y)
      for (std::size_t x = 0; x < w; ++x) sy += std::abs(v[(c * h + y + 1) * w + x] - v[(c * h + y) * w + x]);
    ref += sx / ((w - 1) * h) + sy / (w * (h - 1));
  }
  EXPECT_NEAR(nl::loss_tv(Motion(Tensor(Shape{2, h, w}, v), 40)).item(), ref, 1e-5);
}

// ---- sharp prior --------------------------------------------------------------

TEST(LossSharp, Values) {
  Tensor zero(Shape{2}, 0.f);
  EXPECT_EQ(nl::loss_sharp(constant_motion(4, 4, 1.5f, -0.5f), Tensor(Shape{2}, {1.5f, -0.5f})).item(), 0.f);
  EXPECT_NEAR(nl::loss_sharp(constant_motion(4, 4, 2.f, -2.f), zero).item(), 2.0, 1e-6);
  std::mt19937_64 rng(6);
  Tensor f(Shape{2, 4, 4}, random_values<float>(32, rng, -3, 3));
  const double one = nl::loss_sharp(Motion(f, 40), zero).item();
  EXPECT_NEAR(nl::loss_sharp(Motion(nd::scale(f, 2.f), 40), zero).item(), 2 * one, 1e-5);
}

TEST(LossSharp, TargetIsDetachedBatchMean) {
  Tensor a(Shape{2, 2, 2}, {1, 1, 1, 1, 0, 0, 0, 0}), b(Shape{2, 2, 2}, {3, 3, 3, 3, 2, 2, 2, 2});
  a.set_requires_grad(true);
  auto t = nl::sharp_motion_target<float>({Motion(a, 40), Motion(b, 40)});
  EXPECT_FLOAT_EQ(t.values()[0], 2.f);
  EXPECT_FLOAT_EQ(t.values()[1], 1.f);
  EXPECT_FALSE(t.requires_grad());
}

// ---- LSGAN --------------------------------------------------------------------

TEST(LossGan, Values) {
  Tensor half(Shape{1, 4, 4}, 0.5f), one(Shape{1, 4, 4}, 1.f), zero(Shape{1, 4, 4}, 0.f);
  using nl::GanSide;
  EXPECT_NEAR(nl::loss_gan<float>({half}, {half, half}, GanSide::Discriminator).item(), 0.5, 1e-6);
  EXPECT_EQ(nl::loss_gan<float>({one}, {}, GanSide::Deblurrer).item(), 0.f);
  EXPECT_EQ(nl::loss_gan<float>({zero}, {}, GanSide::Deblurrer).item(), 1.f);
  EXPECT_EQ(nl::loss_gan<float>({zero}, {one, one}, GanSide::Discriminator).item(), 0.f);
  EXPECT_EQ(nl::loss_gan<float>({one}, {zero, zero}, GanSide::Discriminator).item(), 2.f);
}

// ---- content ------------------------------------------------------------------

TEST(LossContent, Values) {
  auto a = random_image(8, 8, 7);
  EXPECT_EQ(nl::loss_content(a, a).item(), 0.f);
  auto b = nd::add_scalar(a, 0.1f);
  EXPECT_NEAR(nl::loss_content(a, b).item(), 0.01, 1e-6);
  auto c = random_image(8, 8, 8);
  EXPECT_EQ(nl::loss_content(a, c).item(), nl::loss_content(c, a).item());
  EXPECT_THROW(nl::loss_content(a, random_image(8, 4, 1)), std::invalid_argument);
}

// ---- objective_M ----------------------------------------------------------------

TEST(ObjectiveM, LambdaScalesOnlyReblur) {
  auto s = tiny_setup<float>(10);
  nl::ObjectiveOptions a, b;
  a.weights.lambda = 1;
  b.weights.lambda = 100;
  auto oa = nl::objective_M(s.batch, s.nets(), a), ob = nl::objective_M(s.batch, s.nets(), b);
  const double reblur = *oa.report.get("reblur");
  EXPECT_GT(reblur, 0);
  EXPECT_EQ(*oa.report.get("m_b"), *ob.report.get("m_b"));
  EXPECT_NEAR(ob.total.item() - oa.total.item(), 99 * reblur, 1e-4 * ob.total.item());
}

TEST(ObjectiveM, ZeroAtOptimum) {
  auto s = random_image(8, 8, 11);
  auto m_b = constant_motion(8, 8, 40.f, -40.f);
  nl::ObjectiveOptions opt;
  auto o = nl::objective_M_from_maps<float>({s}, {s}, {m_b}, {Motion::zeros(8, 8)}, {m_b}, opt);
  EXPECT_EQ(o.total.item(), 0.f);
  for (const auto& name : o.report.present()) EXPECT_EQ(*o.report.get(name), 0.0) << name;
}

TEST(ObjectiveM, ReportsMotionTermsOnly) {
  auto s = tiny_setup<float>(12);
  auto o = nl::objective_M(s.batch, s.nets(), {});
  EXPECT_EQ(o.report.present(), (std::vector<std::string>{"reblur", "m_b", "m_s", "m_shat", "tv_rel"}));
}

TEST(ObjectiveM, RoutesGradientToMOnly) {
  auto s = tiny_setup<float>(13);
  nd::backward(nl::objective_M(s.batch, s.nets(), {}).total);
  EXPECT_TRUE(any_grad(s.m));
  EXPECT_FALSE(any_grad(s.d));
  EXPECT_FALSE(any_grad(s.n));
}

TEST(ObjectiveM, DisablingReblurRemovesTerm) {
  auto s = tiny_setup<float>(14);
  nl::ObjectiveOptions opt;
  opt.switches.reblur_for_m = false;
  auto o = nl::objective_M(s.batch, s.nets(), opt);
  EXPECT_FALSE(o.report.has("reblur"));
}

// ---- objective_D ----------------------------------------------------------------

TEST(ObjectiveD, BetaZeroDisablesOnlyNatural) {
  auto s = tiny_setup<float>(20);
  nl::ObjectiveOptions full, nobeta;
  nobeta.weights.beta = 0;
  auto a = nl::objective_D(s.batch, &s.paired, s.nets(), full);
  auto b = nl::objective_D(s.batch, &s.paired, s.nets(), nobeta);
  ASSERT_TRUE(a.report.has("natural_d"));
  EXPECT_FALSE(b.report.has("natural_d"));
  for (const char* name : {"reblur", "sharp", "tv_shat", "content"}) EXPECT_EQ(*a.report.get(name), *b.report.get(name));
  EXPECT_NEAR(a.total.item() - b.total.item(), 0.1 * *a.report.get("natural_d"), 1e-4);
}

TEST(ObjectiveD, SharpPriorAtIdentityInit) {
  auto s = tiny_setup<float>(21);
  s.d = nn::init_params(tiny_arch(), nn::Role::Deblur, 21);  // exact identity
  auto o = nl::objective_D<float>(s.batch, nullptr, s.nets(), {});
  double tx = 0, ty = 0;
  for (const auto& img : s.batch.sharp) {
    auto m = nn::motion_forward(s.m, img);
    for (std::size_t i = 0; i < 256; ++i) {
      tx += m.field.values()[i];
      ty += m.field.values()[256 + i];
    }
  }
  tx /= 512;
  ty /= 512;
  double ref = 0;
  for (const auto& img : s.batch.blurry) {
    auto m = nn::motion_forward(s.m, img);
    for (std::size_t i = 0; i < 256; ++i)
      ref += std::abs(m.field.values()[i] - tx) + std::abs(m.field.values()[256 + i] - ty);
  }
  ref /= 2 * 512;
  EXPECT_GT(ref, 0);
  EXPECT_NEAR(*o.report.get("sharp"), ref, 1e-5);
}

TEST(ObjectiveD, RoutesGradientToDOnly) {
  auto s = tiny_setup<float>(22);
  nd::backward(nl::objective_D(s.batch, &s.paired, s.nets(), {}).total);
  EXPECT_TRUE(any_grad(s.d));
  EXPECT_FALSE(any_grad(s.m));
  EXPECT_FALSE(any_grad(s.n));
}

// ---- objective_N ----------------------------------------------------------------

TEST(ObjectiveN, RoutesGradientToNOnly) {
  auto s = tiny_setup<float>(30);
  auto o = nl::objective_N(s.batch, s.nets(), {});
  EXPECT_EQ(o.report.present(), std::vector<std::string>{"natural_n"});
  nd::backward(o.total);
  EXPECT_TRUE(any_grad(s.n));
  EXPECT_FALSE(any_grad(s.d));
  EXPECT_FALSE(any_grad(s.m));
}

TEST(ObjectiveN, SharpOnlyRealSetRejected) {
  auto s = tiny_setup<float>(31);
  nl::ObjectiveOptions opt;
  opt.switches.real_includes_blurry = false;
  EXPECT_THROW(nl::objective_N(s.batch, s.nets(), opt), std::invalid_argument);
}

// ---- report -----------------------------------------------------------------------

TEST(LossReport, CsvRowHasTenTermColumns) {
  nl::LossReport r;
  r.set("reblur", 0.5);
  r.set("content", 0.25);
  EXPECT_EQ(nl::LossReport::csv_header(),
            "step,lr,reblur,m_b,m_s,m_shat,tv_rel,sharp,natural_d,natural_n,tv_shat,content");
  EXPECT_EQ(r.csv_row(7, 0.001), "7,0.001,0.5,,,,,,,,,0.25");
  EXPECT_THROW(r.set("bogus", 1), std::invalid_argument);
}

// ---- finite differences on tiny nets -------------------------------------------------

namespace {

std::vector<Tensor64> leaves(nn::NetParams<double>& net, std::initializer_list<const char*> names) {
  std::vector<Tensor64> out;
  for (const char* n : names) out.push_back(net.params.get(n));
  return out;
}

// Whole objectives sum thousands of bilinear samples and absolute values, so a
// 1e-4 step tends to straddle a kink somewhere.
nd::GradcheckOptions sampled(std::uint64_t seed) {
  nd::GradcheckOptions o;
  o.step = 3e-6;
  o.one_sided_fallback = true;
  o.max_coords_per_leaf = 24;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(ObjectiveGradcheck, LossReblurThroughMotion) {
  std::mt19937_64 rng(40);
  Tensor64 s(Shape{3, 16, 16}, random_values<double>(768, rng, 0, 1));
  Tensor64 b(Shape{3, 16, 16}, random_values<double>(768, rng, 0, 1));
  Tensor64 m(Shape{2, 16, 16}, random_values<double>(512, rng, -4, 4));
  s.set_requires_grad(true);
  m.set_requires_grad(true);
  auto res = nd::gradcheck(
      "loss_reblur", [&] { return nl::loss_reblur(b, s, nb::MotionMap<double>(m, 40), 15); }, {s, m});
  EXPECT_LT(res.max_rel_error, 1e-3);
}

TEST(ObjectiveGradcheck, ObjectiveM) {
  auto s = tiny_setup<double>(41);
  nl::ObjectiveOptions opt;
  opt.n_steps = 5;
  // detach(M(B)) is a constant of the objective; hold it at the base point.
  nl::MotionMaps<double> base;
  {
    nd::NoGradGuard guard;
    base = nl::motion_maps(s.batch, s.nets());
  }
  auto objective = [&] {
    auto maps = nl::motion_maps(s.batch, s.nets());
    return nl::objective_M_from_maps(s.batch.blurry, s.batch.deblurred, maps.m_b, maps.m_s, maps.m_shat, opt,
                                     &base.m_b)
        .total;
  };
  auto res = nd::gradcheck(
      "objective_M", objective,
      leaves(s.m, {"stem.w", "down1.w", "up1.w", "refine.w", "head.w", "head.b"}), sampled(1));
  EXPECT_LT(res.max_rel_error, 1e-3) << res.max_abs_error;
}

TEST(ObjectiveGradcheck, ObjectiveD) {
  auto s = tiny_setup<double>(42);
  nl::ObjectiveOptions opt;
  opt.n_steps = 5;
  auto res = nd::gradcheck(
      "objective_D", [&] { return nl::objective_D(s.batch, &s.paired, s.nets(), opt).total; },
      leaves(s.d, {"stem.w", "down1.w", "up1.w", "refine.w", "head.w", "head.b"}), sampled(2));
  EXPECT_LT(res.max_rel_error, 1e-3) << res.max_abs_error;
}

TEST(ObjectiveGradcheck, ObjectiveN) {
  auto s = tiny_setup<double>(43);
  auto res = nd::gradcheck(
      "objective_N", [&] { return nl::objective_N(s.batch, s.nets(), {}).total; },
      leaves(s.n, {"patch1.w", "patch2.w", "score.w", "score.b"}), sampled(3));
  EXPECT_LT(res.max_rel_error, 1e-3) << res.max_abs_error;
}
