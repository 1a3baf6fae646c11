#pragma once

#include <vector>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::diff {

/// Topologically ordered view of the nodes reachable from a root that
/// require gradients. Parents precede children.
template <typename T>
class Graph {
 public:
  static Graph trace(const BasicTensor<T>& root);

  const std::vector<detail::Node<T>*>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

  /// Seeds d(root)/d(root) = 1 and runs every backward rule once, in
  /// reverse topological order.
  void backward();

 private:
  detail::Node<T>* root_ = nullptr;
  std::vector<detail::Node<T>*> order_;
};

/// Accumulates dLoss/dLeaf into every reachable leaf with requires_grad.
/// A loss that does not require grad is accepted and leaves all grads alone.
template <typename T>
void backward(const BasicTensor<T>& loss);

}  // namespace neurmap::diff
