#include "ahip/vit/vision_transformer.hpp"

namespace ahip {

namespace {

template <typename Scalar>
Parameter<Scalar> ones(const std::string& name, Index n) {
  return Parameter<Scalar>(name, Tensor<Scalar>::filled(Shape{n}, Scalar(1)));
}

template <typename Scalar>
Parameter<Scalar> zeros(const std::string& name, Index n) {
  return Parameter<Scalar>(name, Tensor<Scalar>(Shape{n}));
}

template <typename Scalar>
void append(std::vector<Parameter<Scalar>>& out, const Linear<Scalar>& l) {
  out.push_back(l.weight);
  out.push_back(l.bias);
}

template <typename Scalar>
Var<Scalar> apply_drop(const Var<Scalar>& branch, Index batch, const DropPath& drop) {
  if (!drop.active()) return branch;
  std::vector<Scalar> factors(static_cast<std::size_t>(batch));
  const auto keep = static_cast<Scalar>(1.0 / (1.0 - drop.rate));
  for (auto& f : factors) f = drop.rng->bernoulli(drop.rate) ? Scalar(0) : keep;
  return scale_groups(branch, factors);
}

}  // namespace

template <typename Scalar>
std::vector<Parameter<Scalar>> BlockWeights<Scalar>::parameters() const {
  std::vector<Parameter<Scalar>> out{ln1_gamma, ln1_beta};
  append(out, query);
  append(out, key);
  append(out, value);
  out.push_back(ln2_gamma);
  out.push_back(ln2_beta);
  append(out, mlp_up);
  append(out, mlp_down);
  return out;
}

template <typename Scalar>
std::vector<Parameter<Scalar>> BlockWeights<Scalar>::parameters(BlockPart part) const {
  switch (part) {
    case BlockPart::kLn1: return {ln1_gamma, ln1_beta};
    case BlockPart::kQuery: return {query.weight, query.bias};
    case BlockPart::kKey: return {key.weight, key.bias};
    case BlockPart::kValue: return {value.weight, value.bias};
    case BlockPart::kLn2: return {ln2_gamma, ln2_beta};
    case BlockPart::kMlpUp: return {mlp_up.weight, mlp_up.bias};
    case BlockPart::kMlpDown: return {mlp_down.weight, mlp_down.bias};
  }
  return {};
}

template <typename Scalar>
Tensor<Scalar> extract_patches(const Tensor<Scalar>& images, int patch_size) {
  if (images.rank() != 4) {
    throw InputError("expected images [b, c, H, W], got " + shape_string(images.shape()));
  }
  const Index b = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  const Index p = patch_size;
  const Index ph = h / p, pw = w / p;
  Tensor<Scalar> out(Shape{b * ph * pw, c * p * p});
  auto om = out.matrix();
  for (Index n = 0; n < b; ++n) {
    for (Index py = 0; py < ph; ++py) {
      for (Index px = 0; px < pw; ++px) {
        const Index row = (n * ph + py) * pw + px;
        Index col = 0;
        for (Index ch = 0; ch < c; ++ch) {
          for (Index dy = 0; dy < p; ++dy) {
            const Scalar* src = images.data() + ((n * c + ch) * h + py * p + dy) * w + px * p;
            for (Index dx = 0; dx < p; ++dx) om(row, col++) = src[dx];
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
VisionTransformer<Scalar> VisionTransformer<Scalar>::create(const ViTConfig& config, Rng& rng) {
  config.validate();
  VisionTransformer vit;
  vit.config_ = config;
  const Index d = config.embed_dim;
  vit.patch_proj_ = Linear<Scalar>::create("backbone.patch", config.patch_dim(), d, rng);
  vit.class_token_ =
      Parameter<Scalar>("backbone.cls_token", truncated_normal<Scalar>({1, d}, 0.02, rng));
  vit.pos_embed_ = Parameter<Scalar>("backbone.pos_embed",
                                     truncated_normal<Scalar>({config.tokens(), d}, 0.02, rng));
  for (int l = 0; l < config.depth; ++l) {
    const std::string n = "backbone.blocks." + std::to_string(l);
    BlockWeights<Scalar> b;
    b.ln1_gamma = ones<Scalar>(n + ".ln1.gamma", d);
    b.ln1_beta = zeros<Scalar>(n + ".ln1.beta", d);
    b.query = Linear<Scalar>::create(n + ".query", d, d, rng);
    b.key = Linear<Scalar>::create(n + ".key", d, d, rng);
    b.value = Linear<Scalar>::create(n + ".value", d, d, rng);
    b.ln2_gamma = ones<Scalar>(n + ".ln2.gamma", d);
    b.ln2_beta = zeros<Scalar>(n + ".ln2.beta", d);
    b.mlp_up = Linear<Scalar>::create(n + ".mlp_up", d, config.mlp_dim(), rng);
    b.mlp_down = Linear<Scalar>::create(n + ".mlp_down", config.mlp_dim(), d, rng);
    vit.blocks_.push_back(std::move(b));
  }
  vit.norm_gamma_ = ones<Scalar>("backbone.norm.gamma", d);
  vit.norm_beta_ = zeros<Scalar>("backbone.norm.beta", d);
  return vit;
}

template <typename Scalar>
Var<Scalar> VisionTransformer<Scalar>::patch_embed(const Tensor<Scalar>& images,
                                                   const Var<Scalar>* token_override) const {
  if (images.rank() != 4 || images.dim(1) != config_.channels ||
      images.dim(2) != config_.image_size || images.dim(3) != config_.image_size) {
    throw InputError("patch_embed: expected [b, " + std::to_string(config_.channels) + ", " +
                     std::to_string(config_.image_size) + ", " +
                     std::to_string(config_.image_size) + "], got " +
                     shape_string(images.shape()));
  }
  const Index batch = images.dim(0);
  const Var<Scalar> patches = constant(extract_patches(images, config_.patch_size));
  const Var<Scalar>& token = token_override ? *token_override : class_token_.var();
  return add_tiled(prepend_token(patch_proj_(patches), token, batch), pos_embed_.var());
}

template <typename Scalar>
Var<Scalar> VisionTransformer<Scalar>::mhsa(int l, const Var<Scalar>& x_norm, Index batch) const {
  const auto& b = block(l);
  return attention(b.query(x_norm), b.key(x_norm), b.value(x_norm), batch,
                   static_cast<Index>(config_.num_heads));
}

template <typename Scalar>
Var<Scalar> VisionTransformer<Scalar>::block_forward(int l, const Var<Scalar>& x, Index batch,
                                                     const SlotFn<Scalar>& slot,
                                                     const DropPath& drop) const {
  const auto& b = block(l);
  const auto eps = static_cast<Scalar>(config_.ln_eps);
  Var<Scalar> z = x;
  if (slot) {
    const Var<Scalar> u = mhsa(l, layernorm(x, b.ln1_gamma.var(), b.ln1_beta.var(), eps), batch);
    z = add(x, apply_drop(slot(u), batch, drop));
  }
  const Var<Scalar> h = b.mlp_down(gelu(b.mlp_up(layernorm(z, b.ln2_gamma.var(), b.ln2_beta.var(), eps))));
  return add(z, apply_drop(h, batch, drop));
}

template <typename Scalar>
Var<Scalar> VisionTransformer<Scalar>::class_features(const Var<Scalar>& y, Index batch) const {
  const auto eps = static_cast<Scalar>(config_.ln_eps);
  return extract_class_token(layernorm(y, norm_gamma_.var(), norm_beta_.var(), eps), batch);
}

template <typename Scalar>
Var<Scalar> VisionTransformer<Scalar>::forward(const Tensor<Scalar>& images,
                                               const std::vector<SlotFn<Scalar>>& slots,
                                               const Var<Scalar>* token_override,
                                               const DropPath& drop) const {
  if (static_cast<int>(slots.size()) != config_.depth) {
    throw DimensionError("forward: expected one slot per block");
  }
  const Index batch = images.dim(0);
  Var<Scalar> x = patch_embed(images, token_override);
  for (int l = 0; l < config_.depth; ++l) x = block_forward(l, x, batch, slots[l], drop);
  return class_features(x, batch);
}

template <typename Scalar>
std::vector<Parameter<Scalar>> VisionTransformer<Scalar>::parameters() const {
  std::vector<Parameter<Scalar>> out;
  append(out, patch_proj_);
  out.push_back(class_token_);
  out.push_back(pos_embed_);
  for (const auto& b : blocks_) {
    for (auto& p : b.parameters()) out.push_back(p);
  }
  out.push_back(norm_gamma_);
  out.push_back(norm_beta_);
  return out;
}

template <typename Scalar>
void VisionTransformer<Scalar>::set_trainable(bool trainable) const {
  for (const auto& p : parameters()) p.set_trainable(trainable);
}

template <typename Scalar>
std::uint64_t VisionTransformer<Scalar>::content_hash() const {
  std::vector<std::uint64_t> hashes;
  for (const auto& p : parameters()) hashes.push_back(p.content_hash());
  return fnv1a64(hashes.data(), hashes.size() * sizeof(std::uint64_t));
}

template <typename Scalar>
VisionTransformer<Scalar> VisionTransformer<Scalar>::clone() const {
  VisionTransformer out;
  out.config_ = config_;
  out.patch_proj_ = patch_proj_.clone("backbone.patch");
  out.class_token_ = class_token_.clone();
  out.pos_embed_ = pos_embed_.clone();
  for (const auto& b : blocks_) {
    BlockWeights<Scalar> c;
    c.ln1_gamma = b.ln1_gamma.clone();
    c.ln1_beta = b.ln1_beta.clone();
    c.query = {b.query.weight.clone(), b.query.bias.clone()};
    c.key = {b.key.weight.clone(), b.key.bias.clone()};
    c.value = {b.value.weight.clone(), b.value.bias.clone()};
    c.ln2_gamma = b.ln2_gamma.clone();
    c.ln2_beta = b.ln2_beta.clone();
    c.mlp_up = {b.mlp_up.weight.clone(), b.mlp_up.bias.clone()};
    c.mlp_down = {b.mlp_down.weight.clone(), b.mlp_down.bias.clone()};
    out.blocks_.push_back(std::move(c));
  }
  out.norm_gamma_ = norm_gamma_.clone();
  out.norm_beta_ = norm_beta_.clone();
  return out;
}

template <typename Scalar>
void VisionTransformer<Scalar>::save(Checkpoint& ck) const {
  for (const auto& p : parameters()) ck.put(p.name(), p.value());
}

template <typename Scalar>
VisionTransformer<Scalar> VisionTransformer<Scalar>::load(const Checkpoint& ck,
                                                          const ViTConfig& config) {
  Rng unused(0);
  VisionTransformer vit = create(config, unused);
  for (auto& p : vit.parameters()) {
    Tensor<Scalar> t = ck.template get<Scalar>(p.name());
    if (t.shape() != p.value().shape()) {
      throw FormatError("checkpoint: shape mismatch for " + p.name());
    }
    p.value() = std::move(t);
  }
  return vit;
}

template struct BlockWeights<float>;
template struct BlockWeights<double>;
template class VisionTransformer<float>;
template class VisionTransformer<double>;
template Tensor<float> extract_patches<float>(const Tensor<float>&, int);
template Tensor<double> extract_patches<double>(const Tensor<double>&, int);

}  // namespace ahip
