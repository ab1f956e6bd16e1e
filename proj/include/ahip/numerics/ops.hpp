#pragma once

#include <span>
#include <vector>

#include "ahip/numerics/autograd.hpp"

namespace ahip {

// Differentiable free functions over Var. Tensors of rank > 2 are treated
// as matrices whose rows fold every leading dimension (see Tensor::matrix).

/// a[..., k] x b[k, n] -> [..., n].
template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);

/// Adds bias[n] to every row of x[..., n].
template <typename Scalar>
Var<Scalar> add_bias(const Var<Scalar>& x, const Var<Scalar>& bias);

/// Adds pattern[r, n] to each consecutive group of r rows of x[k*r, n].
template <typename Scalar>
Var<Scalar> add_tiled(const Var<Scalar>& x, const Var<Scalar>& pattern);

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& x, Scalar factor);

/// Multiplies each group of rows (one group per sample) by a fixed factor.
/// Used for drop-path: factors are 0 or 1/(1-p).
template <typename Scalar>
Var<Scalar> scale_groups(const Var<Scalar>& x, const std::vector<Scalar>& factors);

/// Exact (erf) GELU.
template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& x);

/// Max-stabilised softmax along `axis`.
template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& x, Index axis);

/// Normalises every row of x[..., n]; gamma and beta have n entries.
template <typename Scalar>
Var<Scalar> layernorm(const Var<Scalar>& x, const Var<Scalar>& gamma,
                      const Var<Scalar>& beta, Scalar eps);

/// Multi-head scaled dot-product attention. q, k, v are [batch*L, d] with
/// heads laid out contiguously along d; returns the concatenated head
/// outputs [batch*L, d] (no output projection).
template <typename Scalar>
Var<Scalar> attention(const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v,
                      Index batch, Index heads);

/// Attention probabilities [batch, heads, L, L] for inspection.
template <typename Scalar>
Tensor<Scalar> attention_weights(const Tensor<Scalar>& q, const Tensor<Scalar>& k,
                                 Index batch, Index heads);

/// tokens[batch*P, d] plus token[1, d] -> [batch*(P+1), d] with the token
/// at position 0 of every sample.
template <typename Scalar>
Var<Scalar> prepend_token(const Var<Scalar>& tokens, const Var<Scalar>& token, Index batch);

/// Row `index` of every sample in x[batch*L, d] -> [batch, d].
template <typename Scalar>
Var<Scalar> select_token(const Var<Scalar>& x, Index batch, Index index);

/// Mean label-smoothed negative log-likelihood of logits[batch, C].
/// Throws InputError for labels outside [0, C) or smoothing outside [0, 1).
template <typename Scalar>
Var<Scalar> cross_entropy_smoothed(const Var<Scalar>& logits, std::span<const int> labels,
                                   Scalar smoothing);

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x);

/// sum(x * weights) with constant weights of x's shape.
template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& x, const Tensor<Scalar>& weights);

}  // namespace ahip
