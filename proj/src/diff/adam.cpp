#include "neurmap/diff/adam.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace neurmap::diff {

template <typename T>
void ParameterSet<T>::add(std::string name, BasicTensor<T> value) {
  if (contains(name)) throw std::invalid_argument("parameter set: duplicate name " + name);
  items_.push_back({std::move(name), std::move(value)});
}

template <typename T>
bool ParameterSet<T>::contains(const std::string& name) const {
  for (const auto& it : items_) {
    if (it.name == name) return true;
  }
  return false;
}

template <typename T>
const BasicTensor<T>& ParameterSet<T>::get(const std::string& name) const {
  for (const auto& it : items_) {
    if (it.name == name) return it.value;
  }
  throw std::out_of_range("parameter set: no tensor named " + name);
}

template <typename T>
BasicTensor<T>& ParameterSet<T>::get(const std::string& name) {
  return const_cast<BasicTensor<T>&>(std::as_const(*this).get(name));
}

template <typename T>
std::size_t ParameterSet<T>::numel() const {
  std::size_t n = 0;
  for (const auto& it : items_) n += it.value.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& it : items_) it.value.zero_grad();
}

template <typename T>
ParameterSet<T> ParameterSet<T>::clone() const {
  ParameterSet out;
  for (const auto& it : items_) {
    auto copy = it.value.clone();
    copy.set_requires_grad(it.value.requires_grad());
    out.items_.push_back({it.name, std::move(copy)});
  }
  return out;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::frozen() const {
  ParameterSet out;
  for (const auto& it : items_) out.items_.push_back({it.name, it.value.detach()});
  return out;
}

template <typename T>
AdamState<T> AdamState<T>::for_params(const ParameterSet<T>& params) {
  AdamState s;
  for (const auto& it : params.items()) {
    s.moments.push_back({std::vector<T>(it.value.numel(), T(0)),
                         std::vector<T>(it.value.numel(), T(0))});
  }
  return s;
}

template <typename T>
bool adam_step(ParameterSet<T>& params, AdamState<T>& state, double lr) {
  if (lr < 0) throw std::invalid_argument("adam: negative learning rate");
  auto& items = params.items();
  if (state.moments.size() != items.size()) {
    throw std::invalid_argument("adam: state tracks " + std::to_string(state.moments.size()) +
                                " tensors, parameter set has " + std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& p = items[i].value;
    if (state.moments[i].m.size() != p.numel()) {
      throw std::invalid_argument("adam: moment shape mismatch for " + items[i].name);
    }
    for (T g : p.grad()) {
      if (!std::isfinite(g)) {
        spdlog::warn("adam: non-finite gradient in '{}', update skipped", items[i].name);
        return false;
      }
    }
  }

  const std::int64_t t = state.t + 1;
  const double b1 = AdamState<T>::beta1, b2 = AdamState<T>::beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& p = items[i].value;
    auto values = p.mutable_values();
    auto grad = p.grad();
    auto& mom = state.moments[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const T g = grad.empty() ? T(0) : grad[j];
      mom.m[j] = static_cast<T>(b1 * mom.m[j] + (1.0 - b1) * g);
      mom.v[j] = static_cast<T>(b2 * mom.v[j] + (1.0 - b2) * g * g);
      const double m_hat = mom.m[j] / bc1;
      const double v_hat = mom.v[j] / bc2;
      values[j] = static_cast<T>(values[j] - lr * m_hat / (std::sqrt(v_hat) + AdamState<T>::eps));
    }
  }
  state.t = t;
  return true;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template struct AdamState<float>;
template struct AdamState<double>;
template bool adam_step(ParameterSet<float>&, AdamState<float>&, double);
template bool adam_step(ParameterSet<double>&, AdamState<double>&, double);

}  // namespace neurmap::diff
