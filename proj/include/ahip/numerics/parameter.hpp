#pragma once

#include <string>
#include <utility>

#include "ahip/numerics/ops.hpp"
#include "ahip/numerics/rng.hpp"

namespace ahip {

/// A named leaf of the graph. Copies are handles onto the same storage;
/// clone() produces an independent parameter.
template <typename Scalar>
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor<Scalar> value, bool trainable = true)
      : name_(std::move(name)), var_(std::move(value), trainable) {}

  const std::string& name() const { return name_; }
  bool defined() const { return var_.defined(); }

  bool trainable() const { return var_.requires_grad(); }
  void set_trainable(bool trainable) const { var_.set_requires_grad(trainable); }

  const Var<Scalar>& var() const { return var_; }
  Tensor<Scalar>& value() { return var_.mutable_value(); }
  const Tensor<Scalar>& value() const { return var_.value(); }
  Index numel() const { return var_.value().numel(); }

  bool has_grad() const { return var_.has_grad(); }
  const Tensor<Scalar>& grad() const { return var_.grad(); }
  void zero_grad() const { var_.zero_grad(); }

  Parameter clone() const { return clone(name_); }
  Parameter clone(std::string name) const {
    return Parameter(std::move(name), var_.value(), trainable());
  }

  std::uint64_t content_hash() const { return var_.value().content_hash(); }

 private:
  std::string name_;
  Var<Scalar> var_;
};

/// Truncated normal (+-2 std) tensor.
template <typename Scalar>
Tensor<Scalar> truncated_normal(Shape shape, double std, Rng& rng) {
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t[i] = static_cast<Scalar>(rng.truncated_normal(std));
  return t;
}

/// Affine map x W + b with W stored [in, out].
template <typename Scalar>
struct Linear {
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

  /// Weights ~ truncated normal(0.02), bias zero.
  static Linear create(const std::string& name, Index in, Index out, Rng& rng) {
    return {Parameter<Scalar>(name + ".weight", truncated_normal<Scalar>({in, out}, 0.02, rng)),
            Parameter<Scalar>(name + ".bias", Tensor<Scalar>(Shape{out}))};
  }

  Var<Scalar> operator()(const Var<Scalar>& x) const {
    return add_bias(matmul(x, weight.var()), bias.var());
  }

  Index in_features() const { return weight.value().dim(0); }
  Index out_features() const { return weight.value().dim(1); }
  Index parameter_count() const { return weight.numel() + bias.numel(); }

  void set_trainable(bool t) const {
    weight.set_trainable(t);
    bias.set_trainable(t);
  }

  Linear clone(const std::string& name) const {
    return {weight.clone(name + ".weight"), bias.clone(name + ".bias")};
  }

  std::uint64_t content_hash() const {
    const std::uint64_t h[2] = {weight.content_hash(), bias.content_hash()};
    return fnv1a64(h, sizeof(h));
  }
};

}  // namespace ahip
