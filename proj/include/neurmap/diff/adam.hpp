#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::diff {

template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T> value;
};

/// Ordered, name-unique collection of learnable leaves.
template <typename T>
class ParameterSet {
 public:
  void add(std::string name, BasicTensor<T> value);
  const BasicTensor<T>& get(const std::string& name) const;
  BasicTensor<T>& get(const std::string& name);
  bool contains(const std::string& name) const;

  std::size_t size() const { return items_.size(); }
  std::size_t numel() const;
  const std::vector<NamedTensor<T>>& items() const { return items_; }
  std::vector<NamedTensor<T>>& items() { return items_; }

  void zero_grad();
  /// Independent leaves holding the same values.
  ParameterSet clone() const;
  /// Same values, requires_grad off: a frozen view for objectives that
  /// must not train this network.
  ParameterSet frozen() const;

 private:
  std::vector<NamedTensor<T>> items_;
};

template <typename T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;
};

template <typename T>
struct AdamState {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  std::vector<AdamMoments<T>> moments;  // parallel to ParameterSet::items()
  std::int64_t t = 0;

  static AdamState for_params(const ParameterSet<T>& params);
};

/// One bias-corrected Adam update from the gradients held by `params`.
/// A parameter without a gradient is treated as having a zero gradient.
/// If any gradient is non-finite the whole group is left untouched, the
/// event is logged, and false is returned.
template <typename T>
bool adam_step(ParameterSet<T>& params, AdamState<T>& state, double lr);

}  // namespace neurmap::diff
