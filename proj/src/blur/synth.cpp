#include "neurmap/blur/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace neurmap::blur {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

struct Vec2 {
  double u, v;
};

Vec2 draw_vector(std::mt19937_64& rng, const SynthParams& p) {
  std::uniform_real_distribution<double> mag(p.min_magnitude, p.max_magnitude);
  std::uniform_real_distribution<double> ang(-std::numbers::pi / 2, std::numbers::pi / 2);
  const double r = mag(rng), a = ang(rng);
  return {std::max(0.0, r * std::cos(a)), r * std::sin(a)};
}

// Separable Gaussian blur of one plane with edge replicate.
void gaussian_filter(std::vector<double>& plane, std::size_t h, std::size_t w, double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& x : k) x /= total;

  const long H = static_cast<long>(h), W = static_cast<long>(w);
  std::vector<double> tmp(plane.size());
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * plane[y * W + std::clamp(x + i, 0L, W - 1)];
      tmp[y * W + x] = acc;
    }
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp[std::clamp(y + i, 0L, H - 1) * W + x];
      plane[y * W + x] = acc;
    }
}

}  // namespace

MotionMap<float> synth_motion_field(std::uint64_t seed, std::size_t h, std::size_t w,
                                    const SynthParams& p) {
  if (!(p.alpha > 0)) throw std::invalid_argument("synth_motion_field: alpha must be > 0");
  if (p.n_segments < 0) throw std::invalid_argument("synth_motion_field: n_segments must be >= 0");
  if (p.smoothness < 0 || p.smoothness > 1)
    throw std::invalid_argument("synth_motion_field: smoothness must lie in [0,1]");
  if (p.min_magnitude < 0 || p.max_magnitude < p.min_magnitude)
    throw std::invalid_argument("synth_motion_field: need 0 <= min_magnitude <= max_magnitude");
  if (h == 0 || w == 0) throw std::invalid_argument("synth_motion_field: empty resolution");

  std::mt19937_64 rng(mix_seed(seed));
  const Vec2 global = draw_vector(rng, p);
  const std::size_t HW = h * w;
  std::vector<double> u(HW, global.u), v(HW, global.v);

  if (p.n_segments > 0) {
    const double extent = static_cast<double>(std::max(h, w));
    std::uniform_real_distribution<double> cx(0, static_cast<double>(w)), cy(0, static_cast<double>(h));
    std::uniform_real_distribution<double> spread(0.15, 0.4);
    std::vector<double> weight_sum(HW, 1.0);
    for (int s = 0; s < p.n_segments; ++s) {
      const double x0 = cx(rng), y0 = cy(rng), sigma = spread(rng) * extent;
      const Vec2 r = draw_vector(rng, p);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double dx = x - x0, dy = y - y0;
          const double wk = 3.0 * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          u[y * w + x] += wk * r.u;
          v[y * w + x] += wk * r.v;
          weight_sum[y * w + x] += wk;
        }
    }
    for (std::size_t i = 0; i < HW; ++i) {
      u[i] /= weight_sum[i];
      v[i] /= weight_sum[i];
    }
    const double sigma = p.smoothness * extent / 4;
    if (sigma >= 0.5) {
      gaussian_filter(u, h, w, sigma);
      gaussian_filter(v, h, w, sigma);
    }
  }

  std::vector<float> vals(2 * HW);
  for (std::size_t i = 0; i < HW; ++i) {
    vals[i] = static_cast<float>(std::clamp(u[i], -p.alpha, p.alpha));
    vals[HW + i] = static_cast<float>(std::clamp(v[i], -p.alpha, p.alpha));
  }
  return MotionMap<float>(diff::Tensor(diff::Shape{2, h, w}, std::move(vals)), p.alpha);
}

}  // namespace neurmap::blur
