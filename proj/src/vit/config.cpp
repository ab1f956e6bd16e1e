#include "ahip/vit/config.hpp"

#include "ahip/numerics/errors.hpp"

namespace ahip {

ViTConfig ViTConfig::from_profile(const std::string& name) {
  if (name == "tiny") return tiny();
  if (name == "base8") return base8();
  throw UsageError("unknown model profile '" + name + "' (expected tiny or base8)");
}

void ViTConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
    throw InputError("image_size must be a positive multiple of patch_size");
  }
  if (depth <= 0 || num_heads <= 0 || embed_dim <= 0 || embed_dim % num_heads != 0) {
    throw InputError("embed_dim must equal num_heads * head_dim");
  }
  if (channels <= 0 || mlp_ratio <= 0) throw InputError("channels and mlp_ratio must be positive");
  if (drop_path_rate < 0.0 || drop_path_rate >= 1.0) {
    throw InputError("drop_path_rate must lie in [0, 1)");
  }
}

}  // namespace ahip
