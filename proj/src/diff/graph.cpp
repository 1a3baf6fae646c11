#include "neurmap/diff/graph.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace neurmap::diff {

template <typename T>
Graph<T> Graph<T>::trace(const BasicTensor<T>& root) {
  Graph g;
  if (!root.defined() || !root.requires_grad()) return g;
  g.root_ = root.node().get();

  // Iterative post-order DFS; a node is emitted after all its parents.
  std::unordered_set<const detail::Node<T>*> seen;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(g.root_, 0);
  seen.insert(g.root_);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      g.order_.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

template <typename T>
void Graph<T>::backward() {
  if (!root_) return;
  root_->ensure_grad()[0] += T(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_str(loss.shape()));
  }
  Graph<T>::trace(loss).backward();
}

template class Graph<float>;
template class Graph<double>;
template void backward(const BasicTensor<float>&);
template void backward(const BasicTensor<double>&);

}  // namespace neurmap::diff
