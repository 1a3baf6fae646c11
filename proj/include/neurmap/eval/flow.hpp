#pragma once

#include <array>
#include <optional>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::eval {

/// Colour-wheel rendering of a [2,h,w] motion field as a [3,h,w] image:
/// hue is the direction atan2(v, u), saturation is |m| / max_norm clipped
/// to 1, value is 1. A zero vector is white. Without max_norm the largest
/// magnitude in the field is used, or `fallback_norm` for an all-zero field.
diff::Tensor flow_to_color(const diff::Tensor& field, std::optional<double> max_norm = std::nullopt,
                           double fallback_norm = 40.0);

/// HSV (h in degrees, s and v in [0,1]) to RGB in [0,1].
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

}  // namespace neurmap::eval
