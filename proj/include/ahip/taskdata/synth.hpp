#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ahip/taskdata/dataset.hpp"

namespace ahip {

enum class SynthTransform { kIdentity, kPixelPermutation, kRotation, kLabelPermutation, kChannelNoise };

/// Base image families: stroke glyphs or filled silhouettes.
enum class SynthStyle { kStrokes, kShapes };

const char* to_string(SynthTransform t);
SynthTransform synth_transform_from_string(const std::string& name);
const char* to_string(SynthStyle s);
SynthStyle synth_style_from_string(const std::string& name);

/// A classification task obtained by transforming a base generator.
/// theta in [0, 1] sets the transform strength; theta = 0 gives the base
/// distribution exactly (the same images for the same sample seed).
///   pixel-permutation: a random fraction theta of pixels is permuted
///   rotation: images rotated by theta * max_rotation_deg
///   label-permutation: round(theta * C) classes are cycled
///   channel-noise: additive Gaussian noise of std theta * 0.5
struct SynthTaskSpec {
  std::string name = "synth";
  std::uint64_t base_seed = 1;
  SynthStyle style = SynthStyle::kStrokes;
  SynthTransform transform = SynthTransform::kIdentity;
  double theta = 0.0;
  std::uint64_t sample_seed = 1;
  std::uint64_t transform_seed = 1;
  int num_classes = 10;
  int train_size = 540;
  int test_size = 256;
  int image_size = 28;
  int channels = 1;
  double max_rotation_deg = 45.0;
};

/// Single base sample of class `label` (before the task transform).
Tensor<float> synth_base_image(const SynthTaskSpec& spec, int label, std::uint64_t index);

/// Applies the spec's transform to one base image; `index` keys the
/// per-sample noise stream.
Tensor<float> synth_transform_image(const SynthTaskSpec& spec, const Tensor<float>& image,
                                    std::uint64_t index);
int synth_transform_label(const SynthTaskSpec& spec, int label);

/// Balanced train and test splits (val left empty).
TaskDataset synth_task(const SynthTaskSpec& spec);

/// The five-task desk stream: digits, pixel-permuted digits, rotated
/// digits (45 degrees), label-permuted digits, silhouettes.
std::vector<SynthTaskSpec> toy_vdd_stream(int train_size = 540, int test_size = 256);

}  // namespace ahip
