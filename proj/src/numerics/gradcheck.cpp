#include "ahip/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ahip/numerics/rng.hpp"

namespace ahip {

template <typename Scalar>
GradCheckReport finite_difference_check(const DifferentiableOp<Scalar>& op,
                                        const std::vector<Tensor<Scalar>>& inputs,
                                        double tolerance, std::uint64_t seed, double step) {
  Rng rng = Rng::stream(seed, "gradcheck.projection");

  std::vector<Var<Scalar>> vars;
  for (const auto& t : inputs) vars.emplace_back(t, true);
  const Var<Scalar> probe = op(vars);
  Tensor<Scalar> projection(probe.shape());
  for (Index i = 0; i < projection.numel(); ++i) projection[i] = static_cast<Scalar>(rng.normal());

  backward(weighted_sum(probe, projection));

  auto evaluate = [&](const std::vector<Tensor<Scalar>>& xs) {
    std::vector<Var<Scalar>> cs;
    for (const auto& t : xs) cs.emplace_back(t, false);
    return static_cast<double>(op(cs).value().values().dot(projection.values()));
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  std::vector<Tensor<Scalar>> work = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<Scalar> reverse =
        vars[k].has_grad() ? vars[k].grad() : Tensor<Scalar>(inputs[k].shape());
    double diff = 0.0, scale = 0.0;
    for (Index i = 0; i < inputs[k].numel(); ++i) {
      const Scalar orig = work[k][i];
      work[k][i] = orig + static_cast<Scalar>(step);
      const double up = evaluate(work);
      work[k][i] = orig - static_cast<Scalar>(step);
      const double down = evaluate(work);
      work[k][i] = orig;
      const double central = (up - down) / (2.0 * step);
      diff = std::max(diff, std::abs(central - static_cast<double>(reverse[i])));
      scale = std::max({scale, std::abs(central), std::abs(static_cast<double>(reverse[i]))});
    }
    const double rel = scale > 0.0 ? diff / scale : 0.0;
    report.relative_error.push_back(rel);
    report.max_relative_error = std::max(report.max_relative_error, rel);
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

template GradCheckReport finite_difference_check<float>(const DifferentiableOp<float>&,
                                                        const std::vector<Tensor<float>>&,
                                                        double, std::uint64_t, double);
template GradCheckReport finite_difference_check<double>(const DifferentiableOp<double>&,
                                                         const std::vector<Tensor<double>>&,
                                                         double, std::uint64_t, double);

}  // namespace ahip
