#pragma once

#include "ahip/taskdata/dataset.hpp"

namespace ahip {

/// image [c, H, W] -> [c, H, W]. Bilinear sampling with edge clamping.
Tensor<float> flip_horizontal(const Tensor<float>& image);
Tensor<float> flip_vertical(const Tensor<float>& image);
/// Crops the window [top, top + h) x [left, left + w) and resizes it to
/// out_h x out_w.
Tensor<float> crop_resize(const Tensor<float>& image, double top, double left, double h, double w,
                          int out_h, int out_w);
/// Plain resize to out_h x out_w.
Tensor<float> resize(const Tensor<float>& image, int out_h, int out_w);

/// Random scale-and-crop (area fraction in [scale_min, scale_max], aspect
/// jitter) then independent flips, as enabled by `policy`. Returns the
/// input unchanged when the policy is all off.
Tensor<float> augment(const Tensor<float>& image, const AugmentPolicy& policy, Rng& rng);

/// Batch version over images [n, c, H, W].
Tensor<float> augment_batch(const Tensor<float>& images, const AugmentPolicy& policy, Rng& rng);

}  // namespace ahip
