#pragma once

#include <span>
#include <string>
#include <vector>

#include "ahip/numerics/rng.hpp"
#include "ahip/numerics/tensor.hpp"

namespace ahip {

/// Images [n, c, H, W] in [0, 1] with integer labels.
struct Dataset {
  Tensor<float> images;
  std::vector<int> labels;

  Index size() const { return static_cast<Index>(labels.size()); }
  bool empty() const { return labels.empty(); }
};

Dataset subset(const Dataset& ds, std::span<const Index> indices);

template <typename Scalar>
Tensor<Scalar> gather_images(const Dataset& ds, std::span<const Index> indices);
std::vector<int> gather_labels(const Dataset& ds, std::span<const Index> indices);

/// First `count` samples (or all of them) in their stored order.
Dataset head_samples(const Dataset& ds, Index count);

struct AugmentPolicy {
  bool scale_crop = false;
  double scale_min = 0.9;
  double scale_max = 1.0;
  double aspect_jitter = 0.05;
  bool hflip = false;
  bool vflip = false;

  bool enabled() const { return scale_crop || hflip || vflip; }
};

struct TaskDataset {
  std::string name;
  Dataset train;
  Dataset val;
  Dataset test;
  int num_classes = 0;
  int channels = 1;
  int height = 0;
  int width = 0;
  AugmentPolicy augment;

  /// Throws InputError when a label is out of range or a split's geometry
  /// differs from the declared one.
  void validate() const;
};

/// Index batches for one epoch: a seeded shuffle, repeated until at least
/// `min_batches` full batches exist (a short final batch is kept only if
/// no repetition was needed).
std::vector<std::vector<Index>> epoch_batches(Index n, Index batch_size, Index min_batches,
                                              Rng& rng);

/// Sequential batches covering [0, n).
std::vector<std::vector<Index>> sequential_batches(Index n, Index batch_size);

}  // namespace ahip
