#include "neurmap/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "neurmap/diff/graph.hpp"

namespace neurmap::diff {

GradcheckResult gradcheck(const std::string& name, const std::function<Tensor64()>& loss_fn,
                          std::vector<Tensor64> leaves, const GradcheckOptions& opts) {
  for (auto& leaf : leaves) {
    if (!leaf.requires_grad()) throw std::invalid_argument("gradcheck: leaf without requires_grad");
    leaf.zero_grad();
  }
  const Tensor64 loss = loss_fn();
  const double base = loss.item();
  backward(loss);

  GradcheckResult res{name};
  std::mt19937_64 rng(opts.seed);
  for (auto& leaf : leaves) {
    std::vector<double> analytic(leaf.numel(), 0.0);
    if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(leaf.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.max_coords_per_leaf && coords.size() > opts.max_coords_per_leaf) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_leaf);
    }

    auto values = leaf.mutable_values();
    for (std::size_t i : coords) {
      const double saved = values[i];
      double plus, minus;
      {
        NoGradGuard guard;
        values[i] = saved + opts.step;
        plus = loss_fn().item();
        values[i] = saved - opts.step;
        minus = loss_fn().item();
      }
      values[i] = saved;
      std::vector<double> numerics{(plus - minus) / (2 * opts.step)};
      if (opts.one_sided_fallback) {
        numerics.push_back((plus - base) / opts.step);
        numerics.push_back((base - minus) / opts.step);
      }
      double best_rel = INFINITY, best_abs = INFINITY;
      for (double numeric : numerics) {
        const double abs_err = std::abs(analytic[i] - numeric);
        const double denom =
            std::max({std::abs(analytic[i]), std::abs(numeric), opts.denominator_floor});
        if (abs_err / denom < best_rel) best_rel = abs_err / denom, best_abs = abs_err;
      }
      res.max_abs_error = std::max(res.max_abs_error, best_abs);
      res.max_rel_error = std::max(res.max_rel_error, best_rel);
      ++res.coords_checked;
    }
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  return res;
}

}  // namespace neurmap::diff
