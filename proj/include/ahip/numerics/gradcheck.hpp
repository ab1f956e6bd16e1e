#pragma once

#include <functional>
#include <vector>

#include "ahip/numerics/ops.hpp"

namespace ahip {

struct GradCheckReport {
  /// Per input: max |g_reverse - g_central| / max(|g_central|_inf, |g_reverse|_inf).
  std::vector<double> relative_error;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

template <typename Scalar>
using DifferentiableOp = std::function<Var<Scalar>(const std::vector<Var<Scalar>>&)>;

/// Compares reverse-mode gradients of `op` against central differences.
/// The op output is reduced to a scalar by a fixed random projection drawn
/// from `seed`, so every output element contributes. A failing check is
/// reported, not thrown.
template <typename Scalar>
GradCheckReport finite_difference_check(const DifferentiableOp<Scalar>& op,
                                        const std::vector<Tensor<Scalar>>& inputs,
                                        double tolerance, std::uint64_t seed = 0,
                                        double step = 1e-6);

}  // namespace ahip
