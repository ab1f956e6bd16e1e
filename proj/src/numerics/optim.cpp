#include "ahip/numerics/optim.hpp"

#include <cmath>
#include <numbers>

namespace ahip {

double cosine_lr(long step, long total_steps, double base_lr) {
  if (total_steps <= 0) return base_lr;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

template <typename Scalar>
void Adam<Scalar>::add(const Parameter<Scalar>& p, double lr_scale) {
  Slot s{p, Tensor<Scalar>(p.value().shape()), Tensor<Scalar>(p.value().shape()), 0, lr_scale};
  slots_.push_back(std::move(s));
}

template <typename Scalar>
double Adam<Scalar>::current_lr() const {
  return config_.total_steps > 0 ? cosine_lr(step_, config_.total_steps, config_.lr)
                                 : config_.lr;
}

template <typename Scalar>
void Adam<Scalar>::step() {
  for (const auto& s : slots_) {
    if (s.param.trainable() && s.param.has_grad() && !s.param.grad().all_finite()) {
      throw NumericError("adam: non-finite gradient for " + s.param.name());
    }
  }
  const double lr = current_lr();
  for (auto& s : slots_) {
    if (!s.param.trainable() || !s.param.has_grad()) continue;
    ++s.updates;
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    const auto& g = s.param.grad().values().array();
    s.m.values().array() = b1 * s.m.values().array() + (Scalar(1) - b1) * g;
    s.v.values().array() = b2 * s.v.values().array() + (Scalar(1) - b2) * g.square();
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(config_.beta1, s.updates));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(config_.beta2, s.updates));
    const auto step_size = static_cast<Scalar>(lr * s.lr_scale);
    const auto eps = static_cast<Scalar>(config_.eps);
    s.param.value().values().array() -= step_size * (s.m.values().array() / c1) /
         ((s.v.values().array() / c2).sqrt() + eps);
  }
  ++step_;
}

template <typename Scalar>
void Adam<Scalar>::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace ahip
