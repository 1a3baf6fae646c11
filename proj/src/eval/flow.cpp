#include "neurmap/eval/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace neurmap::eval {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s, hp = h / 60.0, x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1)), m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  return {r + m, g + m, b + m};
}

diff::Tensor flow_to_color(const diff::Tensor& field, std::optional<double> max_norm, double fallback_norm) {
  if (field.rank() != 3 || field.dim(0) != 2)
    throw std::invalid_argument("flow_to_color: expected [2,h,w], got " + diff::shape_str(field.shape()));
  const std::size_t h = field.dim(1), w = field.dim(2), n = h * w;
  const auto f = field.values();
  double norm = 0;
  if (max_norm) {
    norm = *max_norm;
  } else {
    for (std::size_t i = 0; i < n; ++i) norm = std::max(norm, std::hypot(double(f[i]), double(f[n + i])));
    if (norm == 0) norm = fallback_norm;
  }
  if (!(norm > 0)) throw std::invalid_argument("flow_to_color: max_norm must be > 0");
  std::vector<float> out(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = f[i], v = f[n + i];
    const double hue = std::atan2(v, u) * 180.0 / std::numbers::pi;
    const auto rgb = hsv_to_rgb(hue, std::min(1.0, std::hypot(u, v) / norm), 1.0);
    for (std::size_t c = 0; c < 3; ++c) out[c * n + i] = static_cast<float>(rgb[c]);
  }
  return diff::Tensor(diff::Shape{3, h, w}, std::move(out));
}

}  // namespace neurmap::eval
