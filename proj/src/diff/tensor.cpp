#include "neurmap/diff/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace neurmap::diff {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
thread_local bool grad_mode_enabled = true;
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool on) { grad_mode_enabled = on; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : node_(std::make_shared<detail::Node<T>>()) {
  node_->value.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : node_(std::make_shared<detail::Node<T>>()) {
  if (values.size() != shape_numel(shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t i) const {
  if (i >= rank()) throw std::out_of_range("tensor: axis out of range");
  return node_->shape[i];
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("tensor: item() on shape " + shape_str(shape()));
  }
  return node_->value[0];
}

template <typename T>
T BasicTensor<T>::at(std::size_t c, std::size_t y, std::size_t x) const {
  const auto& s = node_->shape;
  return node_->value[(c * s[1] + y) * s[2] + x];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  if (!node_->is_leaf()) {
    throw std::logic_error("tensor: requires_grad can only be set on leaves");
  }
  node_->requires_grad = on;
  return *this;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(node_->shape, node_->value);
}

namespace detail {

template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                           std::vector<BasicTensor<T>> parents,
                           std::function<void(const Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (GradMode::enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return BasicTensor<T>(std::move(node));
}

template BasicTensor<float> make_result(const char*, Shape, std::vector<float>,
                                        std::vector<BasicTensor<float>>,
                                        std::function<void(const Node<float>&)>);
template BasicTensor<double> make_result(const char*, Shape, std::vector<double>,
                                         std::vector<BasicTensor<double>>,
                                         std::function<void(const Node<double>&)>);

}  // namespace detail

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace neurmap::diff
