#include "ahip/taskdata/augment.hpp"

#include <algorithm>
#include <cmath>

#include "ahip/numerics/errors.hpp"

namespace ahip {

namespace {

void check_image(const Tensor<float>& image) {
  if (image.rank() != 3) throw DimensionError("augment: expected [c, H, W], got " + shape_string(image.shape()));
}

}  // namespace

Tensor<float> flip_horizontal(const Tensor<float>& image) {
  check_image(image);
  const Index c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor<float> out(image.shape());
  for (Index ch = 0; ch < c; ++ch)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) out[(ch * h + y) * w + x] = image[(ch * h + y) * w + (w - 1 - x)];
  return out;
}

Tensor<float> flip_vertical(const Tensor<float>& image) {
  check_image(image);
  const Index c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor<float> out(image.shape());
  for (Index ch = 0; ch < c; ++ch)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) out[(ch * h + y) * w + x] = image[(ch * h + (h - 1 - y)) * w + x];
  return out;
}

Tensor<float> crop_resize(const Tensor<float>& image, double top, double left, double h, double w,
                          int out_h, int out_w) {
  check_image(image);
  const Index c = image.dim(0), ih = image.dim(1), iw = image.dim(2);
  Tensor<float> out(Shape{c, out_h, out_w});
  for (Index ch = 0; ch < c; ++ch) {
    const float* plane = image.data() + ch * ih * iw;
    auto at = [&](Index y, Index x) {
      return plane[std::clamp<Index>(y, 0, ih - 1) * iw + std::clamp<Index>(x, 0, iw - 1)];
    };
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        // pixel centres of the output grid mapped into the crop window
        const double sy = top + (y + 0.5) * h / out_h - 0.5;
        const double sx = left + (x + 0.5) * w / out_w - 0.5;
        const auto y0 = static_cast<Index>(std::floor(sy)), x0 = static_cast<Index>(std::floor(sx));
        const double fy = sy - y0, fx = sx - x0;
        const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                         fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
        out[(ch * out_h + y) * out_w + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor<float> resize(const Tensor<float>& image, int out_h, int out_w) {
  check_image(image);
  if (image.dim(1) == out_h && image.dim(2) == out_w) return image;
  return crop_resize(image, 0, 0, static_cast<double>(image.dim(1)), static_cast<double>(image.dim(2)),
                     out_h, out_w);
}

Tensor<float> augment(const Tensor<float>& image, const AugmentPolicy& policy, Rng& rng) {
  check_image(image);
  if (!policy.enabled()) return image;
  const int h = static_cast<int>(image.dim(1)), w = static_cast<int>(image.dim(2));
  Tensor<float> out = image;
  if (policy.scale_crop) {
    const double area = policy.scale_min + (policy.scale_max - policy.scale_min) * rng.uniform();
    const double aspect = 1.0 + policy.aspect_jitter * (2 * rng.uniform() - 1);
    const double ch = std::min<double>(h, h * std::sqrt(area / aspect));
    const double cw = std::min<double>(w, w * std::sqrt(area * aspect));
    const double top = (h - ch) * rng.uniform(), left = (w - cw) * rng.uniform();
    out = crop_resize(out, top, left, ch, cw, h, w);
  }
  if (policy.hflip && rng.bernoulli(0.5)) out = flip_horizontal(out);
  if (policy.vflip && rng.bernoulli(0.5)) out = flip_vertical(out);
  return out;
}

Tensor<float> augment_batch(const Tensor<float>& images, const AugmentPolicy& policy, Rng& rng) {
  if (!policy.enabled()) return images;
  if (images.rank() != 4) throw DimensionError("augment_batch: expected [n, c, H, W]");
  const Index n = images.dim(0), stride = images.numel() / std::max<Index>(n, 1);
  const Shape one{images.dim(1), images.dim(2), images.dim(3)};
  Tensor<float> out(images.shape());
  for (Index i = 0; i < n; ++i) {
    Tensor<float> img(one, images.values().segment(i * stride, stride));
    out.values().segment(i * stride, stride) = augment(img, policy, rng).values();
  }
  return out;
}

}  // namespace ahip
