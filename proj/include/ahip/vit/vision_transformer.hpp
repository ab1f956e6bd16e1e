#pragma once

#include <functional>
#include <vector>

#include "ahip/numerics/checkpoint.hpp"
#include "ahip/numerics/parameter.hpp"
#include "ahip/vit/config.hpp"

namespace ahip {

/// Projection slot of one block: maps the multi-head output U[b*L, d] to
/// the attention residual branch. An empty function means Skip, in which
/// case the whole attention branch (including MHSA) is bypassed.
template <typename Scalar>
using SlotFn = std::function<Var<Scalar>(const Var<Scalar>&)>;

/// Per-sample stochastic depth. Active only when `rate > 0` and `rng` set.
struct DropPath {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

/// Parts of a block that can be trained or frozen independently.
enum class BlockPart { kLn1, kQuery, kKey, kValue, kLn2, kMlpUp, kMlpDown };

template <typename Scalar>
struct BlockWeights {
  Parameter<Scalar> ln1_gamma, ln1_beta;
  Linear<Scalar> query, key, value;
  Parameter<Scalar> ln2_gamma, ln2_beta;
  Linear<Scalar> mlp_up, mlp_down;

  std::vector<Parameter<Scalar>> parameters() const;
  std::vector<Parameter<Scalar>> parameters(BlockPart part) const;
};

/// ViT trunk with an injectable projection slot per block:
///   z = x + slot(MHSA(LN1(x)))         (z = x when the slot is Skip)
///   y = z + MLP_down(GELU(MLP_up(LN2(z))))
/// The projection layers themselves live outside (see ExpertBank).
template <typename Scalar>
class VisionTransformer {
 public:
  VisionTransformer() = default;

  static VisionTransformer create(const ViTConfig& config, Rng& rng);

  const ViTConfig& config() const { return config_; }
  int depth() const { return config_.depth; }
  BlockWeights<Scalar>& block(int l) { return blocks_.at(static_cast<std::size_t>(l)); }
  const BlockWeights<Scalar>& block(int l) const { return blocks_.at(static_cast<std::size_t>(l)); }
  const Parameter<Scalar>& class_token() const { return class_token_; }
  const Parameter<Scalar>& position_embedding() const { return pos_embed_; }

  /// images[b, c, H, W] -> tokens[b*L, d]: patch projection, class token
  /// (or `token_override`) prepended, positional encodings added.
  Var<Scalar> patch_embed(const Tensor<Scalar>& images,
                          const Var<Scalar>* token_override = nullptr) const;

  /// Concatenated head outputs U for already-normalised input.
  Var<Scalar> mhsa(int l, const Var<Scalar>& x_norm, Index batch) const;

  Var<Scalar> block_forward(int l, const Var<Scalar>& x, Index batch, const SlotFn<Scalar>& slot,
                            const DropPath& drop = {}) const;

  /// Final layer norm followed by extraction of token 0 -> [b, d].
  Var<Scalar> class_features(const Var<Scalar>& y, Index batch) const;

  /// patch_embed -> every block with its slot -> class_features.
  Var<Scalar> forward(const Tensor<Scalar>& images, const std::vector<SlotFn<Scalar>>& slots,
                      const Var<Scalar>* token_override = nullptr,
                      const DropPath& drop = {}) const;

  std::vector<Parameter<Scalar>> parameters() const;
  void set_trainable(bool trainable) const;
  std::uint64_t content_hash() const;
  VisionTransformer clone() const;

  /// Parameters are stored under their own names ("backbone.*").
  void save(Checkpoint& ck) const;
  static VisionTransformer load(const Checkpoint& ck, const ViTConfig& config);

 private:
  ViTConfig config_;
  Linear<Scalar> patch_proj_;
  Parameter<Scalar> class_token_;
  Parameter<Scalar> pos_embed_;
  std::vector<BlockWeights<Scalar>> blocks_;
  Parameter<Scalar> norm_gamma_, norm_beta_;
};

/// images[b, c, H, W] -> non-overlapping patches [b*P, c*p*p], patches in
/// row-major order, each flattened channel-major.
template <typename Scalar>
Tensor<Scalar> extract_patches(const Tensor<Scalar>& images, int patch_size);

/// Token `0` of every sample: [b*L, d] -> [b, d].
template <typename Scalar>
Var<Scalar> extract_class_token(const Var<Scalar>& y, Index batch) {
  return select_token(y, batch, 0);
}

}  // namespace ahip
