#pragma once

#include <vector>

#include "ahip/numerics/parameter.hpp"

namespace ahip {

/// base_lr * 0.5 * (1 + cos(pi * step / total_steps)).
double cosine_lr(long step, long total_steps, double base_lr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Steps over which the cosine schedule decays to zero; 0 keeps lr constant.
  long total_steps = 0;
};

/// Adam with bias correction and a cosine-decayed learning rate.
///
/// A parameter is updated only if it is trainable and received a gradient
/// in the current step; bias correction uses that parameter's own update
/// count, so single-path training leaves off-path weights untouched.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  /// Registers a parameter; its learning rate is `lr * lr_scale`.
  void add(const Parameter<Scalar>& p, double lr_scale = 1.0);

  /// Applies one update. Throws NumericError on a non-finite gradient
  /// (no parameter is modified in that case).
  void step();
  void zero_grad();

  double current_lr() const;
  long step_count() const { return step_; }
  std::size_t size() const { return slots_.size(); }

  /// First/second moments of the i-th registered parameter.
  const Tensor<Scalar>& first_moment(std::size_t i) const { return slots_[i].m; }
  const Tensor<Scalar>& second_moment(std::size_t i) const { return slots_[i].v; }

 private:
  struct Slot {
    Parameter<Scalar> param;
    Tensor<Scalar> m;
    Tensor<Scalar> v;
    long updates = 0;
    double lr_scale = 1.0;
  };

  AdamConfig config_;
  std::vector<Slot> slots_;
  long step_ = 0;
};

}  // namespace ahip
