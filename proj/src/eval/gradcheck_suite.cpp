#include "neurmap/eval/gradcheck_suite.hpp"

#include <memory>
#include <random>

#include "neurmap/blur/reblur.hpp"
#include "neurmap/diff/ops.hpp"
#include "neurmap/loss/objectives.hpp"
#include "neurmap/nets/networks.hpp"

namespace neurmap::eval {

using diff::Shape;
using diff::Tensor64;
namespace nd = neurmap::diff;

namespace {

constexpr double kElementwise = 1e-4;
constexpr double kComposite = 1e-3;

Tensor64 leaf(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(diff::shape_numel(shape));
  for (auto& x : v) x = d(rng);
  Tensor64 t(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

// Sums of many bilinear samples and absolute values are only piecewise
// smooth, so a small step plus one-sided stencils keep clear of the kinks.
diff::GradcheckOptions fine(std::uint64_t seed, std::size_t coords = 0) {
  diff::GradcheckOptions o;
  o.step = 3e-6;
  o.one_sided_fallback = true;
  o.max_coords_per_leaf = coords;
  o.seed = seed;
  return o;
}

void randomize_heads(nets::NetParams<double>& net, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (auto& it : net.params.items())
    if (it.name.rfind("head", 0) == 0)
      for (auto& v : it.value.mutable_values()) v = d(rng);
}

}  // namespace

nets::ArchConfig gradcheck_arch() {
  nets::ArchConfig a;
  a.levels = 1;
  a.base_channels = 4;
  a.patch_levels = 2;
  return a;
}

namespace {

struct TinyWorld {
  nets::NetParams<double> d, m, n;
  loss::UnpairedBatch<double> batch;
  loss::PairedBatch<double> paired;
  loss::ObjectiveOptions opt;

  explicit TinyWorld(std::uint64_t seed) {
    const auto a = gradcheck_arch();
    d = nets::init_params(a, nets::Role::Deblur, seed).cast<double>();
    m = nets::init_params(a, nets::Role::Motion, seed).cast<double>();
    n = nets::init_params(a, nets::Role::Discriminator, seed).cast<double>();
    randomize_heads(d, seed + 1, 0.05);
    randomize_heads(m, seed + 2, 0.3);
    std::mt19937_64 rng(seed + 3);
    auto img = [&] {
      auto t = leaf(Shape{3, 16, 16}, rng, 0.1, 0.9);
      t.set_requires_grad(false);
      return t;
    };
    batch.blurry = {img(), img()};
    batch.sharp = {img(), img()};
    paired.blurry = {img()};
    paired.sharp = {img()};
    opt.n_steps = 5;
  }
  loss::Networks<double> nets() const { return {&d, &m, &n}; }

  static std::vector<Tensor64> leaves(const nets::NetParams<double>& net) {
    std::vector<Tensor64> out;
    for (const auto& it : net.params.items()) out.push_back(it.value);
    return out;
  }
};

}  // namespace

std::vector<GradcheckCase> gradcheck_suite() {
  std::vector<GradcheckCase> cases;
  auto rng = std::make_shared<std::mt19937_64>(4);
  auto a = leaf({2, 3, 4}, *rng, 0.1, 1.0), b = leaf({2, 3, 4}, *rng, -1.0, -0.1);
  auto s = leaf({}, *rng, -1, 1), v = leaf({2}, *rng, -1, 1);
  auto sq = [](const Tensor64& t) { return nd::mean(nd::square(t)); };
  auto elementwise = [&](std::string name, std::function<Tensor64()> fn) {
    cases.push_back({std::move(name), kElementwise, [=] { return nd::gradcheck("", fn, {a, b, s, v}); }});
  };
  elementwise("add", [=] { return sq(nd::add(a, b)); });
  elementwise("sub", [=] { return sq(nd::sub(a, b)); });
  elementwise("mul", [=] { return sq(nd::mul(a, b)); });
  elementwise("mul_scalar", [=] { return sq(nd::mul(a, s)); });
  elementwise("scale", [=] { return sq(nd::scale(a, -1.5)); });
  elementwise("add_scalar", [=] { return sq(nd::add_scalar(a, 0.3)); });
  elementwise("neg", [=] { return sq(nd::neg(b)); });
  elementwise("abs", [=] { return nd::mean(nd::mul(nd::abs(nd::sub(a, b)), a)); });
  elementwise("square", [=] { return nd::mean(nd::mul(nd::square(a), b)); });
  elementwise("tanh", [=] { return sq(nd::tanh(nd::add(a, b))); });
  elementwise("sigmoid", [=] { return sq(nd::sigmoid(nd::mul(a, b))); });
  elementwise("leaky_relu", [=] { return sq(nd::leaky_relu(nd::add(a, b), 0.2)); });
  elementwise("clamp", [=] { return sq(nd::clamp(nd::add(a, b), -0.35, 0.35)); });
  elementwise("mean", [=] { return nd::square(nd::mean(nd::mul(a, b))); });
  elementwise("sum", [=] { return nd::square(nd::sum(nd::mul(a, b))); });
  elementwise("slice", [=] { return sq(nd::slice(nd::mul(a, b), 2, 1, 3)); });
  elementwise("reshape", [=] { return sq(nd::mul(nd::reshape(a, Shape{4, 6}), nd::reshape(b, Shape{4, 6}))); });
  elementwise("spatial_mean", [=] { return sq(nd::spatial_mean(nd::mul(a, b))); });
  elementwise("tile_channels", [=] { return sq(nd::mul(nd::tile_channels(v, 3, 4), a)); });
  elementwise("concat", [=] { return sq(nd::concat<double>({nd::mul(a, a), b})); });
  elementwise("upsample2x", [=] { return sq(nd::mul(nd::upsample2x(a), nd::upsample2x(b))); });

  auto x = leaf({2, 7, 6}, *rng, -1, 1), w = leaf({3, 2, 3, 3}, *rng, -0.5, 0.5), bias = leaf({3}, *rng, -0.5, 0.5);
  cases.push_back({"conv2d", kComposite, [=] {
                     return nd::gradcheck("", [=] { return sq(nd::conv2d(x, w, bias, 1, 1)); }, {x, w, bias});
                   }});
  cases.push_back({"conv2d_stride2", kComposite, [=] {
                     return nd::gradcheck("", [=] { return sq(nd::conv2d(x, w, bias, 2, 1)); }, {x, w, bias});
                   }});

  auto img = leaf({3, 9, 10}, *rng, 0, 1), off = leaf({2, 9, 10}, *rng, -2.3, 2.3),
       mot = leaf({2, 9, 10}, *rng, -3.7, 3.7);
  cases.push_back({"warp", kComposite, [=] {
                     return nd::gradcheck("", [=] { return sq(blur::warp(img, off)); }, {img, off}, fine(1));
                   }});
  cases.push_back({"reblur", kComposite, [=] {
                     return nd::gradcheck(
                         "", [=] { return sq(blur::reblur(img, blur::MotionMap<double>(mot, 40), 7)); }, {img, mot},
                         fine(2));
                   }});
  auto target = leaf({3, 9, 10}, *rng, 0, 1);
  target.set_requires_grad(false);
  cases.push_back({"loss_reblur", kComposite, [=] {
                     return nd::gradcheck(
                         "",
                         [=] { return loss::loss_reblur(target, img, blur::MotionMap<double>(mot, 40), 15); },
                         {img, mot}, fine(3));
                   }});

  cases.push_back({"objective_M", kComposite, [] {
                     auto world = std::make_shared<TinyWorld>(41);
                     // detach(M(B)) is a constant of the objective; hold it at the base point.
                     loss::MotionMaps<double> base;
                     {
                       nd::NoGradGuard guard;
                       base = loss::motion_maps(world->batch, world->nets());
                     }
                     auto fn = [world, base] {
                       auto maps = loss::motion_maps(world->batch, world->nets());
                       return loss::objective_M_from_maps(world->batch.blurry, world->batch.deblurred, maps.m_b,
                                                          maps.m_s, maps.m_shat, world->opt, &base.m_b)
                           .total;
                     };
                     return nd::gradcheck("", fn, TinyWorld::leaves(world->m), fine(5));
                   }});
  cases.push_back({"objective_D", kComposite, [] {
                     auto world = std::make_shared<TinyWorld>(42);
                     auto fn = [world] {
                       return loss::objective_D(world->batch, &world->paired, world->nets(), world->opt).total;
                     };
                     return nd::gradcheck("", fn, TinyWorld::leaves(world->d), fine(6));
                   }});
  cases.push_back({"objective_N", kComposite, [] {
                     auto world = std::make_shared<TinyWorld>(43);
                     auto fn = [world] { return loss::objective_N(world->batch, world->nets(), world->opt).total; };
                     return nd::gradcheck("", fn, TinyWorld::leaves(world->n), fine(7));
                   }});
  return cases;
}

std::vector<GradcheckOutcome> run_gradcheck_suite(const std::function<void(const GradcheckOutcome&)>& on_result) {
  std::vector<GradcheckOutcome> out;
  for (const auto& c : gradcheck_suite()) {
    GradcheckOutcome o{c.name, c.threshold, c.run()};
    o.result.name = c.name;
    if (on_result) on_result(o);
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace neurmap::eval
