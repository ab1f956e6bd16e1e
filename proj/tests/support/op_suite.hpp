#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ahip/numerics/gradcheck.hpp"
#include "ahip/numerics/ops.hpp"
#include "ahip/vit/vision_transformer.hpp"

namespace ahip::oracle {

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

struct OpCase {
  std::string name;
  DifferentiableOp<double> op;
  std::vector<Shape> shapes;
};

/// Every differentiable primitive at a small random configuration.
inline std::vector<OpCase> differentiable_ops() {
  using V = std::vector<Var<double>>;
  std::vector<OpCase> cases;
  cases.push_back({"matmul", [](const V& v) { return matmul(v[0], v[1]); }, {{3, 3}, {3, 3}}});
  cases.push_back({"matmul_batched", [](const V& v) { return matmul(v[0], v[1]); }, {{2, 3, 4}, {4, 2}}});
  cases.push_back({"add", [](const V& v) { return add(v[0], v[1]); }, {{2, 3}, {2, 3}}});
  cases.push_back({"add_bias", [](const V& v) { return add_bias(v[0], v[1]); }, {{4, 3}, {3}}});
  cases.push_back({"add_tiled", [](const V& v) { return add_tiled(v[0], v[1]); }, {{6, 3}, {3, 3}}});
  cases.push_back({"scale", [](const V& v) { return scale(v[0], 0.7); }, {{2, 5}}});
  cases.push_back({"scale_groups", [](const V& v) { return scale_groups(v[0], std::vector<double>{0.0, 2.0}); },
                   {{4, 3}}});
  cases.push_back({"gelu", [](const V& v) { return gelu(v[0]); }, {{3, 4}}});
  cases.push_back({"softmax_rows", [](const V& v) { return softmax(v[0], 1); }, {{3, 4}}});
  cases.push_back({"softmax_cols", [](const V& v) { return softmax(v[0], 0); }, {{3, 4}}});
  cases.push_back({"layernorm", [](const V& v) { return layernorm(v[0], v[1], v[2], 1e-6); }, {{3, 5}, {5}, {5}}});
  cases.push_back({"attention", [](const V& v) { return attention(v[0], v[1], v[2], 2, 2); },
                   {{6, 4}, {6, 4}, {6, 4}}});
  cases.push_back({"prepend_token", [](const V& v) { return prepend_token(v[0], v[1], 2); }, {{6, 3}, {1, 3}}});
  cases.push_back({"select_token", [](const V& v) { return select_token(v[0], 2, 1); }, {{6, 3}}});
  cases.push_back({"cross_entropy_smoothed",
                   [](const V& v) {
                     static const std::vector<int> labels{0, 3, 1, 4};
                     return cross_entropy_smoothed<double>(v[0], labels, 0.1);
                   },
                   {{4, 5}}});
  cases.push_back({"sum", [](const V& v) { return sum(v[0]); }, {{3, 2}}});
  cases.push_back({"weighted_sum",
                   [](const V& v) {
                     Tensor<double> w(Shape{3, 2});
                     for (Index i = 0; i < w.numel(); ++i) w[i] = 0.5 * static_cast<double>(i) - 1.0;
                     return weighted_sum(v[0], w);
                   },
                   {{3, 2}}});
  return cases;
}

inline GradCheckReport check_op(const OpCase& c, std::uint64_t seed, double tolerance = 1e-4) {
  Rng rng = Rng::stream(seed, "gradcheck.inputs." + c.name);
  std::vector<Tensor<double>> inputs;
  for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng));
  return finite_difference_check<double>(c.op, inputs, tolerance, seed);
}

inline ViTConfig gradcheck_vit() {
  ViTConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.channels = 1;
  c.depth = 1;
  c.embed_dim = 8;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  return c;
}

/// Max relative error of reverse-mode gradients against central
/// differences for a full ViT forward (one block with a projection slot):
/// the block input and every parameter, each parameter perturbed in place.
inline double vit_block_gradient_error(std::uint64_t seed) {
  const ViTConfig cfg = gradcheck_vit();
  Rng rng = Rng::stream(seed, "gradcheck.block");
  auto vit = VisionTransformer<double>::create(cfg, rng);
  auto proj = Linear<double>::create("proj", cfg.embed_dim, cfg.embed_dim, rng);
  // larger weights than the 0.02 init so every path carries signal
  std::vector<Parameter<double>> params = vit.parameters();
  params.push_back(proj.weight);
  params.push_back(proj.bias);
  for (auto& p : params) {
    for (Index i = 0; i < p.numel(); ++i) p.value()[i] += 0.3 * rng.normal();
  }
  const Index batch = 2;
  const Tensor<double> images = random_tensor({batch, 1, 8, 8}, rng);
  const Index tokens = cfg.tokens();
  const Tensor<double> x0 = random_tensor({batch * tokens, cfg.embed_dim}, rng);
  const Tensor<double> w_out = random_tensor({batch, cfg.embed_dim}, rng);
  const std::vector<SlotFn<double>> slots{[&](const Var<double>& u) { return proj(u); }};

  // block input
  const auto block_op = [&](const std::vector<Var<double>>& v) { return vit.block_forward(0, v[0], batch, slots[0]); };
  double worst = finite_difference_check<double>(block_op, {x0}, 1e-4, seed).max_relative_error;

  // parameters through the whole forward
  auto loss = [&] { return weighted_sum(vit.forward(images, slots), w_out); };
  for (auto& p : params) p.zero_grad();
  backward(loss());
  const double h = 1e-6;
  for (auto& p : params) {
    const Tensor<double> reverse = p.has_grad() ? p.grad() : Tensor<double>(p.value().shape());
    double diff = 0.0, scale = 0.0;
    for (Index i = 0; i < p.numel(); ++i) {
      const double orig = p.value()[i];
      p.value()[i] = orig + h;
      const double up = loss().value()[0];
      p.value()[i] = orig - h;
      const double down = loss().value()[0];
      p.value()[i] = orig;
      const double central = (up - down) / (2 * h);
      diff = std::max(diff, std::abs(central - reverse[i]));
      scale = std::max({scale, std::abs(central), std::abs(reverse[i])});
    }
    double rmax = 0.0;
    for (Index i = 0; i < p.numel(); ++i) rmax = std::max(rmax, std::abs(reverse[i]));
    // analytically zero gradient (the key bias under softmax): central
    // differences are pure rounding noise
    if (rmax < 1e-12 && scale < 1e-7) continue;
    if (scale > 0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

}  // namespace ahip::oracle
