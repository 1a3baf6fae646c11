#include "neurmap/blur/procedural.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "neurmap/blur/synth.hpp"
#include "neurmap/io/image_io.hpp"

namespace neurmap::blur {

namespace {

using Rgb = std::array<double, 3>;

struct Shape2D {
  int kind;  // 0 rectangle, 1 ellipse, 2 striped rectangle
  double cx, cy, half_w, half_h, cos_a, sin_a;
  Rgb color, color2;
  double period;

  // Writes the colour into `out` when (x, y) lies inside.
  bool sample(double x, double y, Rgb& out) const {
    const double dx = x - cx, dy = y - cy;
    const double lx = cos_a * dx + sin_a * dy, ly = -sin_a * dx + cos_a * dy;
    const double nx = lx / half_w, ny = ly / half_h;
    const bool inside = kind == 1 ? nx * nx + ny * ny <= 1 : std::abs(nx) <= 1 && std::abs(ny) <= 1;
    if (!inside) return false;
    if (kind == 2 && std::fmod(std::abs(lx + 1000 * period), 2 * period) >= period) {
      out = color2;
    } else {
      out = color;
    }
    return true;
  }
};

}  // namespace

diff::Tensor procedural_image(std::uint64_t seed, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw std::invalid_argument("procedural_image: empty resolution");
  std::mt19937_64 rng(mix_seed(seed ^ 0x5eedULL));
  std::uniform_real_distribution<double> unit(0, 1), tone(0.05, 0.95);
  auto color = [&] { return Rgb{tone(rng), tone(rng), tone(rng)}; };

  const Rgb c0 = color(), c1 = color();
  const double ga = 2 * std::numbers::pi * unit(rng);
  const double extent = static_cast<double>(std::max(h, w));

  std::uniform_int_distribution<int> count(6, 12), kind(0, 2);
  std::vector<Shape2D> shapes(static_cast<std::size_t>(count(rng)));
  for (auto& s : shapes) {
    s.kind = kind(rng);
    s.cx = unit(rng) * w;
    s.cy = unit(rng) * h;
    s.half_w = (0.06 + 0.2 * unit(rng)) * extent;
    s.half_h = (0.06 + 0.2 * unit(rng)) * extent;
    const double a = std::numbers::pi * unit(rng);
    s.cos_a = std::cos(a);
    s.sin_a = std::sin(a);
    s.color = color();
    s.color2 = color();
    s.period = 1.5 + 3 * unit(rng);
  }

  constexpr int kSub = 4;
  std::vector<float> vals(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      Rgb acc{0, 0, 0};
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x + (sx + 0.5) / kSub, py = y + (sy + 0.5) / kSub;
          const double t = 0.5 + 0.5 * ((px / w - 0.5) * std::cos(ga) + (py / h - 0.5) * std::sin(ga));
          Rgb c{c0[0] + t * (c1[0] - c0[0]), c0[1] + t * (c1[1] - c0[1]), c0[2] + t * (c1[2] - c0[2])};
          for (const auto& s : shapes) s.sample(px, py, c);  // later shapes paint over earlier ones
          for (int k = 0; k < 3; ++k) acc[k] += c[k];
        }
      }
      for (std::size_t k = 0; k < 3; ++k) vals[(k * h + y) * w + x] = static_cast<float>(acc[k] / (kSub * kSub));
    }
  }
  return io::quantize8(diff::Tensor(diff::Shape{3, h, w}, std::move(vals)));
}

void write_procedural_images(const std::filesystem::path& dir, std::size_t count,
                             std::uint64_t seed, std::size_t h, std::size_t w) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%03zu.png", i);
    io::write_png(dir / name, procedural_image(mix_seed(seed + i), h, w));
  }
}

}  // namespace neurmap::blur
