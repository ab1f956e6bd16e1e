#pragma once

#include <string>

namespace ahip {

/// Geometry of the Vision Transformer.
struct ViTConfig {
  int image_size = 28;
  int patch_size = 7;
  int channels = 1;
  int depth = 4;
  int embed_dim = 64;
  int num_heads = 4;
  int mlp_ratio = 4;
  double drop_path_rate = 0.0;
  double ln_eps = 1e-6;

  /// Desk-scale default: 28px images, 7px patches, 4 blocks of width 64.
  static ViTConfig tiny() { return {}; }
  /// ViT-B/8 at 72px inputs.
  static ViTConfig base8() { return {72, 8, 3, 12, 768, 12, 4, 0.0, 1e-6}; }
  static ViTConfig from_profile(const std::string& name);

  int head_dim() const { return embed_dim / num_heads; }
  int patches_per_side() const { return image_size / patch_size; }
  int num_patches() const { return patches_per_side() * patches_per_side(); }
  /// Sequence length including the class token.
  int tokens() const { return 1 + num_patches(); }
  int patch_dim() const { return channels * patch_size * patch_size; }
  int mlp_dim() const { return embed_dim * mlp_ratio; }

  /// Throws InputError unless d == h * d_h and the image tiles into patches.
  void validate() const;
};

}  // namespace ahip
