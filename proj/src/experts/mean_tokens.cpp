#include "ahip/experts/mean_tokens.hpp"

namespace ahip {

namespace {

template <typename Scalar>
void accumulate_class_rows(VectorX<double>& acc, const Var<Scalar>& out, Index batch) {
  const auto m = out.value().matrix();
  const Index len = m.rows() / batch;
  for (Index b = 0; b < batch; ++b) acc += m.row(b * len).transpose().template cast<double>();
}

template <typename Scalar>
Tensor<Scalar> finish_mean(const VectorX<double>& acc, Index n) {
  Tensor<Scalar> t(Shape{acc.size()});
  t.values() = (acc / static_cast<double>(n)).template cast<Scalar>();
  return t;
}

}  // namespace

template <typename Scalar>
MeanTokenGrid<Scalar> compute_mean_tokens(const VisionTransformer<Scalar>& vit,
                                          const ExpertBank<Scalar>& bank,
                                          const Tensor<Scalar>& images, const Var<Scalar>* token,
                                          Index batch_size) {
  const Index n = images.rank() == 4 ? images.dim(0) : 0;
  if (n == 0) throw InputError("compute_mean_tokens: empty dataset");
  const int depth = bank.depth();
  NoGradGuard guard;
  std::vector<std::vector<VectorX<double>>> acc(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) {
    if (bank.size(l) == 0) throw IntegrityError("compute_mean_tokens: empty bank block");
    acc[l].assign(static_cast<std::size_t>(bank.size(l)), VectorX<double>::Zero(bank.dim()));
  }
  for (Index begin = 0; begin < n; begin += batch_size) {
    const Index count = std::min(batch_size, n - begin);
    Var<Scalar> x = vit.patch_embed(slice_leading(images, begin, count), token);
    for (int l = 0; l < depth; ++l) {
      SlotFn<Scalar> trunk = [&, l](const Var<Scalar>& u) {
        Var<Scalar> base;
        for (int e = 0; e < bank.size(l); ++e) {
          Var<Scalar> out = bank.apply(l, e, u);
          accumulate_class_rows(acc[l][e], out, count);
          if (e == 0) base = out;
        }
        return base;
      };
      x = vit.block_forward(l, x, count, trunk);
    }
  }
  MeanTokenGrid<Scalar> grid(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) {
    for (const auto& a : acc[l]) grid[l].push_back(finish_mean<Scalar>(a, n));
  }
  return grid;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> slot_mean_tokens(const VisionTransformer<Scalar>& vit,
                                             const std::vector<SlotFn<Scalar>>& slots,
                                             const Tensor<Scalar>& images, const Var<Scalar>* token,
                                             Index batch_size) {
  const Index n = images.rank() == 4 ? images.dim(0) : 0;
  if (n == 0) throw InputError("path_mean_tokens: empty dataset");
  const int depth = vit.depth();
  if (static_cast<int>(slots.size()) != depth) throw DimensionError("slot_mean_tokens: one slot per block");
  NoGradGuard guard;
  const Index dim = vit.config().embed_dim;
  std::vector<VectorX<double>> acc(static_cast<std::size_t>(depth), VectorX<double>::Zero(dim));
  for (Index begin = 0; begin < n; begin += batch_size) {
    const Index count = std::min(batch_size, n - begin);
    Var<Scalar> x = vit.patch_embed(slice_leading(images, begin, count), token);
    for (int l = 0; l < depth; ++l) {
      SlotFn<Scalar> tapped;
      if (slots[l]) {
        tapped = [&, l](const Var<Scalar>& u) {
          Var<Scalar> out = slots[l](u);
          accumulate_class_rows(acc[l], out, count);
          return out;
        };
      }
      x = vit.block_forward(l, x, count, tapped);
    }
  }
  std::vector<Tensor<Scalar>> out;
  for (int l = 0; l < depth; ++l) {
    out.push_back(slots[l] ? finish_mean<Scalar>(acc[l], n) : Tensor<Scalar>());
  }
  return out;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> path_mean_tokens(const VisionTransformer<Scalar>& vit,
                                             const ExpertBank<Scalar>& bank,
                                             const GrowthParams<Scalar>* growth,
                                             const PathSpec& path, const Tensor<Scalar>& images,
                                             const Var<Scalar>* token, Index batch_size) {
  return slot_mean_tokens(vit, resolve_path(bank, growth, path), images, token, batch_size);
}

template MeanTokenGrid<float> compute_mean_tokens<float>(const VisionTransformer<float>&,
                                                         const ExpertBank<float>&,
                                                         const Tensor<float>&, const Var<float>*,
                                                         Index);
template MeanTokenGrid<double> compute_mean_tokens<double>(const VisionTransformer<double>&,
                                                           const ExpertBank<double>&,
                                                           const Tensor<double>&,
                                                           const Var<double>*, Index);
template std::vector<Tensor<float>> slot_mean_tokens<float>(const VisionTransformer<float>&,
                                                            const std::vector<SlotFn<float>>&,
                                                            const Tensor<float>&, const Var<float>*,
                                                            Index);
template std::vector<Tensor<double>> slot_mean_tokens<double>(const VisionTransformer<double>&,
                                                              const std::vector<SlotFn<double>>&,
                                                              const Tensor<double>&,
                                                              const Var<double>*, Index);
template std::vector<Tensor<float>> path_mean_tokens<float>(const VisionTransformer<float>&,
                                                            const ExpertBank<float>&,
                                                            const GrowthParams<float>*,
                                                            const PathSpec&, const Tensor<float>&,
                                                            const Var<float>*, Index);
template std::vector<Tensor<double>> path_mean_tokens<double>(
    const VisionTransformer<double>&, const ExpertBank<double>&, const GrowthParams<double>*,
    const PathSpec&, const Tensor<double>&, const Var<double>*, Index);

}  // namespace ahip
