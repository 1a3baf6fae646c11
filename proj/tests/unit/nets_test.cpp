#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "neurmap/diff/gradcheck.hpp"
#include "neurmap/diff/graph.hpp"
#include "neurmap/diff/ops.hpp"
#include "neurmap/nets/networks.hpp"
#include "support/oracles.hpp"

namespace nn = neurmap::nets;
namespace nd = neurmap::diff;
using nd::Shape;
using nd::Tensor;
using neurmap::testing::random_values;

namespace {

Tensor image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Tensor(Shape{3, h, w}, random_values<float>(3 * h * w, rng, 0, 1));
}

nn::ArchConfig tiny() {
  nn::ArchConfig a;
  a.levels = 1;
  a.base_channels = 4;
  a.patch_levels = 1;
  return a;
}

// Heads start at zero; give them random values so outputs depend on every layer.
template <typename T>
void randomize_heads(nn::NetParams<T>& net, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (auto& it : net.params.items())
    if (it.name.rfind("head", 0) == 0)
      for (auto& v : it.value.mutable_values()) v = static_cast<T>(d(rng));
}

}  // namespace

TEST(Networks, DeblurIsIdentityAtInit) {
  auto net = nn::init_params({}, nn::Role::Deblur, 1);
  auto x = image(64, 64, 2);
  auto y = nn::deblur_forward(net, x);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_EQ(y.values()[i], x.values()[i]);
}

TEST(Networks, MotionIsZeroAtInit) {
  auto net = nn::init_params({}, nn::Role::Motion, 1);
  auto m = nn::motion_forward(net, image(32, 32, 3));
  EXPECT_EQ(m.field.shape(), (Shape{2, 32, 32}));
  for (float v : m.field.values()) ASSERT_EQ(v, 0.f);
}

TEST(Networks, OutputRangesHoldForLargeWeights) {
  auto d = nn::init_params({}, nn::Role::Deblur, 4);
  auto m = nn::init_params({}, nn::Role::Motion, 4);
  randomize_heads(d, 5, 3.0);
  randomize_heads(m, 6, 30.0);
  auto x = image(32, 32, 7);
  auto y = nn::deblur_forward(d, x);
  for (float v : y.values()) {
    ASSERT_GE(v, 0.f);
    ASSERT_LE(v, 1.f);
  }
  auto mm = nn::motion_forward(m, x);
  EXPECT_LE(mm.max_abs_component(), 40.0);
  EXPECT_GT(mm.max_abs_component(), 1.0);
}

TEST(Networks, ShapeArithmetic) {
  nn::ArchConfig a;
  EXPECT_EQ(nn::bottleneck_size(a, 64, 64), (std::pair<std::size_t, std::size_t>{8, 8}));
  auto n = nn::init_params(a, nn::Role::Discriminator, 1);
  EXPECT_EQ(nn::discriminator_forward(n, image(64, 64, 8)).shape(), (Shape{1, 8, 8}));
  EXPECT_EQ(nn::receptive_field(a), 31);
  auto d = nn::init_params(a, nn::Role::Deblur, 1);
  EXPECT_EQ(nn::deblur_forward(d, image(64, 64, 9)).shape(), (Shape{3, 64, 64}));
}

TEST(Networks, RejectsIndivisibleResolutionWithPaddingHint) {
  auto d = nn::init_params({}, nn::Role::Deblur, 1);
  try {
    nn::deblur_forward(d, image(50, 64, 1));
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("pad to 56x64"), std::string::npos) << e.what();
  }
}

TEST(Networks, DiscriminatorRejectsTinyInput) {
  auto n = nn::init_params({}, nn::Role::Discriminator, 1);
  EXPECT_THROW(nn::discriminator_forward(n, image(16, 16, 1)), std::invalid_argument);
}

TEST(Networks, DiscriminatorDeterministicAndBatchEquivariant) {
  auto n = nn::init_params({}, nn::Role::Discriminator, 2);
  auto a = image(32, 32, 10), b = image(32, 32, 11), c = image(32, 32, 12);
  auto s1 = nn::discriminator_forward(n, std::vector<Tensor>{a, b, c});
  auto s2 = nn::discriminator_forward(n, std::vector<Tensor>{c, a, b});
  auto vals = [](const Tensor& t) { return std::vector<float>(t.values().begin(), t.values().end()); };
  EXPECT_EQ(vals(s1[0]), vals(s2[1]));
  EXPECT_EQ(vals(s1[1]), vals(s2[2]));
  EXPECT_EQ(vals(s1[2]), vals(s2[0]));
  EXPECT_EQ(vals(nn::discriminator_forward(n, a)), vals(s1[0]));
}

TEST(Networks, InitBiasesZeroAndXavierBound) {
  for (auto role : {nn::Role::Deblur, nn::Role::Motion, nn::Role::Discriminator}) {
    auto net = nn::init_params({}, role, 3);
    for (const auto& it : net.params.items()) {
      const auto& s = it.value.shape();
      if (s.size() == 1) {
        for (float v : it.value.values()) ASSERT_EQ(v, 0.f) << it.name;
      } else {
        const double bound = std::sqrt(6.0 / (9.0 * s[1] + 9.0 * s[0]));
        for (float v : it.value.values()) ASSERT_LE(std::abs(v), bound) << it.name;
      }
    }
  }
}

TEST(Networks, InitDeterministicInSeed) {
  auto a = nn::init_params({}, nn::Role::Motion, 9), b = nn::init_params({}, nn::Role::Motion, 9);
  ASSERT_EQ(a.params.size(), b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    auto va = a.params.items()[i].value.values(), vb = b.params.items()[i].value.values();
    ASSERT_TRUE(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
  }
}

TEST(Networks, DefaultSizesAreDeskScale) {
  auto d = nn::init_params({}, nn::Role::Deblur, 0);
  EXPECT_GT(d.params.numel(), 50000u);
  EXPECT_LT(d.params.numel(), 150000u);
  EXPECT_LT(nn::init_params(tiny(), nn::Role::Motion, 0).params.numel(), 5000u);
}

TEST(Networks, FrozenStopsWeightGradients) {
  auto d = nn::init_params(tiny(), nn::Role::Deblur, 1);
  randomize_heads(d, 2, 0.1);
  auto x = image(8, 8, 3);
  x.set_requires_grad(true);
  auto f = d.frozen();
  nd::backward(nd::mean(nn::deblur_forward(f, x)));
  EXPECT_TRUE(x.has_grad());
  for (const auto& it : d.params.items()) EXPECT_FALSE(it.value.has_grad()) << it.name;
}

TEST(Networks, MotionGradientMatchesFiniteDifferences) {
  auto m = nn::init_params(tiny(), nn::Role::Motion, 5).cast<double>();
  randomize_heads(m, 6, 0.5);
  std::mt19937_64 rng(7);
  nd::Tensor64 x(Shape{3, 8, 8}, random_values<double>(192, rng, 0, 1));
  auto res = nd::gradcheck(
      "motion_forward", [&] { return nd::mean(nn::motion_forward(m, x).field); },
      {m.params.get("stem.w"), m.params.get("down1.w")});
  EXPECT_LT(res.max_rel_error, 1e-4);
}
