#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ahip/numerics/tensor.hpp"

namespace ahip {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_mode_flag(); }

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// One value in the computation graph. Interior nodes keep their parents
/// and a closure that pushes `grad` into them; leaves have neither.
template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Gradient buffer, zero-initialised on first use.
  Tensor<Scalar>& grad_buffer() {
    if (!has_grad) {
      grad = Tensor<Scalar>(value.shape());
      has_grad = true;
    }
    return grad;
  }

  Node& parent(std::size_t i) { return *parents[i]; }
};

/// Handle to a graph node. Copies share the node.
template <typename Scalar>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;
  using BackwardFn = std::function<void(Node<Scalar>&)>;

  Var() = default;

  explicit Var(Tensor<Scalar> value, bool requires_grad = false)
      : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  /// Builds an op result. The closure and the parent links are only kept
  /// when some parent requires a gradient; otherwise the result is a
  /// constant and the graph is not extended.
  static Var from_op(Tensor<Scalar> value, std::vector<Var> parents, BackwardFn fn) {
    Var out(std::move(value));
    bool needs = false;
    if (grad_enabled()) {
      for (const auto& p : parents) needs = needs || p.requires_grad();
    }
    if (needs) {
      out.node_->requires_grad = true;
      out.node_->backward_fn = std::move(fn);
      out.node_->parents.reserve(parents.size());
      for (auto& p : parents) out.node_->parents.push_back(p.node_);
    }
    return out;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<Scalar>& value() const { return node_->value; }
  Tensor<Scalar>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool r) const { node_->requires_grad = r; }

  bool has_grad() const { return node_->has_grad; }
  const Tensor<Scalar>& grad() const { return node_->grad; }
  void zero_grad() const {
    node_->has_grad = false;
    node_->grad = Tensor<Scalar>();
  }

  Node<Scalar>* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

/// Reverse-mode sweep from `root`, seeded with ones. Gradients accumulate
/// into leaves; interior gradients are released afterwards.
template <typename Scalar>
void backward(const Var<Scalar>& root);

template <typename Scalar>
Var<Scalar> constant(Tensor<Scalar> value) {
  return Var<Scalar>(std::move(value), false);
}

}  // namespace ahip
