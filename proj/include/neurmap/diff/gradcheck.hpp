#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::diff {

struct GradcheckOptions {
  double step = 1e-4;
  double denominator_floor = 1e-8;
  // 0 checks every coordinate; otherwise a seeded random subset per leaf.
  std::size_t max_coords_per_leaf = 0;
  std::uint64_t seed = 0;
  // For piecewise-smooth losses: also form the forward and backward
  // differences and score each coordinate by the stencil that agrees best.
  // At a kink the analytic gradient is a one-sided derivative, and only a
  // stencil that straddles the kink disagrees with it.
  bool one_sided_fallback = false;
};

struct GradcheckResult {
  std::string name;
  double max_rel_error = 0;
  double max_abs_error = 0;
  std::size_t coords_checked = 0;
};

/// Compares reverse-mode gradients of `loss_fn` w.r.t. `leaves` against
/// central finite differences. `loss_fn` must rebuild the loss from the
/// current leaf values on every call.
///   rel = |analytic - numeric| / max(|analytic|, |numeric|, floor)
GradcheckResult gradcheck(const std::string& name, const std::function<Tensor64()>& loss_fn,
                          std::vector<Tensor64> leaves, const GradcheckOptions& opts = {});

}  // namespace neurmap::diff
