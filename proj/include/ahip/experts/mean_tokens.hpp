#pragma once

#include "ahip/experts/supernet.hpp"

namespace ahip {

/// mean_tokens[l][e]: mean class token of bank entry e's output at block l.
template <typename Scalar>
using MeanTokenGrid = std::vector<std::vector<Tensor<Scalar>>>;

/// Probes every bank entry on a shared trunk. The trunk runs the base
/// (task-1) expert at each block; at block l, every entry is applied to the
/// same multi-head output and the class-token row of its output (before the
/// residual add) is averaged over `images` [n, c, H, W].
/// Throws InputError when `images` is empty.
template <typename Scalar>
MeanTokenGrid<Scalar> compute_mean_tokens(const VisionTransformer<Scalar>& vit,
                                          const ExpertBank<Scalar>& bank,
                                          const Tensor<Scalar>& images,
                                          const Var<Scalar>* token = nullptr,
                                          Index batch_size = 64);

/// Mean class-token row of each slot's output (empty tensor for a Skip slot).
template <typename Scalar>
std::vector<Tensor<Scalar>> slot_mean_tokens(const VisionTransformer<Scalar>& vit,
                                             const std::vector<SlotFn<Scalar>>& slots,
                                             const Tensor<Scalar>& images,
                                             const Var<Scalar>* token = nullptr,
                                             Index batch_size = 64);

/// Mean class token of the slot output at each block along `path`
/// (empty tensor for Skip blocks).
template <typename Scalar>
std::vector<Tensor<Scalar>> path_mean_tokens(const VisionTransformer<Scalar>& vit,
                                             const ExpertBank<Scalar>& bank,
                                             const GrowthParams<Scalar>* growth,
                                             const PathSpec& path, const Tensor<Scalar>& images,
                                             const Var<Scalar>* token = nullptr,
                                             Index batch_size = 64);

}  // namespace ahip
