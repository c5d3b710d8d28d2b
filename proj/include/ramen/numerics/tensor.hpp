#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ramen {

using Shape = std::vector<std::size_t>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline std::size_t numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {
inline bool &grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
} // namespace detail

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

template <typename S> struct Node {
  Shape shape;
  std::vector<S> data;
  std::vector<S> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node &)> backward_fn;

  S *grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
    return grad.data();
  }
  bool is_leaf() const { return !backward_fn; }
};

/// Handle to a node of the dynamic computation graph.
///
/// Copies share the underlying node. Values are immutable once the tensor
/// participates in a graph; only leaves (parameters, inputs) are mutated, and
/// only by optimizers and finite-difference probes.
template <typename S> class Tensor {
public:
  using value_type = S;

  Tensor() = default;

  Tensor(Shape shape, std::vector<S> data, bool requires_grad = false)
      : node_(std::make_shared<Node<S>>()) {
    if (numel(shape) != data.size())
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + ramen::to_string(shape));
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<S>(n, S(0)), requires_grad);
  }

  static Tensor full(Shape shape, S value, bool requires_grad = false) {
    const std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<S>(n, value), requires_grad);
  }

  static Tensor scalar(S value, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<S>{value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape &shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const S> data() const { return node_->data; }
  /// Direct write access. Only meaningful on leaves.
  std::span<S> mutable_data() { return node_->data; }
  const S &operator[](std::size_t i) const { return node_->data[i]; }
  S item() const {
    if (size() != 1)
      throw DimensionError("item() on tensor of shape " + ramen::to_string(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  std::span<const S> grad() const {
    node_->grad_buffer();
    return node_->grad;
  }
  std::span<S> mutable_grad() { return {node_->grad_buffer(), size()}; }
  void zero_grad() { node_->grad.assign(node_->data.size(), S(0)); }

  std::vector<S> to_vector() const { return node_->data; }

  /// Same values, no graph history.
  Tensor detach() const { return Tensor(shape(), node_->data, false); }

  Node<S> *node() const { return node_.get(); }
  const std::shared_ptr<Node<S>> &node_ptr() const { return node_; }

  /// Builds an op result. Records parents and the backward closure only when
  /// grad mode is on and some parent requires a gradient.
  static Tensor make_result(Shape shape, std::vector<S> data,
                            std::vector<Tensor> parents,
                            std::function<void(Node<S> &)> backward_fn) {
    Tensor out(std::move(shape), std::move(data), false);
    if (!grad_enabled()) return out;
    bool any = false;
    for (const auto &p : parents) any = any || p.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (auto &p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward_fn = std::move(backward_fn);
    return out;
  }

private:
  std::shared_ptr<Node<S>> node_;
};

/// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls;
/// interior gradients are recomputed each call.
template <typename S> void backward(const Tensor<S> &loss) {
  if (loss.size() != 1)
    throw ArgumentError("backward() needs a scalar, got shape " +
                        to_string(loss.shape()));
  if (!loss.requires_grad()) return;

  std::vector<Node<S> *> order;
  std::unordered_set<Node<S> *> seen;
  std::vector<std::pair<Node<S> *, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<S> *parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node<S> *node : order)
    if (!node->is_leaf()) node->grad.assign(node->data.size(), S(0));
  loss.node()->grad_buffer()[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
}

} // namespace ramen
