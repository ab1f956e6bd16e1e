#include "ahip/taskdata/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ahip/numerics/errors.hpp"

namespace ahip {

namespace {

constexpr std::uint64_t kTestOffset = std::uint64_t{1} << 40;

struct Segment {
  double x0, y0, x1, y1;
};

struct Blob {
  bool ellipse;
  double cx, cy, rx, ry, angle, level;
};

double segment_distance(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = s.x0 + t * dx - px, ey = s.y0 + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

std::vector<Segment> stroke_prototype(const SynthTaskSpec& spec, int label) {
  Rng rng = Rng::stream(spec.base_seed, "proto.strokes." + std::to_string(label));
  const double lo = 0.18 * spec.image_size, hi = 0.82 * spec.image_size;
  std::vector<Segment> segs(3);
  for (auto& s : segs) {
    s = {lo + (hi - lo) * rng.uniform(), lo + (hi - lo) * rng.uniform(), lo + (hi - lo) * rng.uniform(),
         lo + (hi - lo) * rng.uniform()};
  }
  return segs;
}

std::vector<Blob> shape_prototype(const SynthTaskSpec& spec, int label) {
  Rng rng = Rng::stream(spec.base_seed, "proto.shapes." + std::to_string(label));
  const double n = spec.image_size;
  std::vector<Blob> blobs(2);
  for (auto& b : blobs) {
    b.ellipse = rng.bernoulli(0.5);
    b.cx = n * (0.3 + 0.4 * rng.uniform());
    b.cy = n * (0.3 + 0.4 * rng.uniform());
    b.rx = n * (0.1 + 0.22 * rng.uniform());
    b.ry = n * (0.1 + 0.22 * rng.uniform());
    b.angle = std::numbers::pi * rng.uniform();
    b.level = 0.45 + 0.55 * rng.uniform();
  }
  return blobs;
}

double soft_step(double signed_distance) { return 1.0 / (1.0 + std::exp(signed_distance / 0.6)); }

double blob_value(const Blob& b, double x, double y) {
  const double c = std::cos(b.angle), s = std::sin(b.angle);
  const double u = (x - b.cx) * c + (y - b.cy) * s;
  const double v = -(x - b.cx) * s + (y - b.cy) * c;
  double d;
  if (b.ellipse) {
    const double r = std::sqrt((u * u) / (b.rx * b.rx) + (v * v) / (b.ry * b.ry));
    d = (r - 1.0) * std::min(b.rx, b.ry);
  } else {
    d = std::max(std::abs(u) - b.rx, std::abs(v) - b.ry);
  }
  return b.level * soft_step(d);
}

float bilinear(const float* plane, int h, int w, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  auto at = [&](int yy, int xx) -> double {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return plane[yy * w + xx];
  };
  return static_cast<float>((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                            fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1)));
}

std::vector<Index> cycled_subset(std::uint64_t seed, const std::string& name, Index n, double theta) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = Rng::stream(seed, name);
  rng.shuffle(order);
  const auto k = static_cast<std::size_t>(std::llround(std::clamp(theta, 0.0, 1.0) * static_cast<double>(n)));
  std::vector<Index> map(static_cast<std::size_t>(n));
  std::iota(map.begin(), map.end(), Index{0});
  for (std::size_t i = 0; i < k; ++i) map[static_cast<std::size_t>(order[i])] = order[(i + 1) % k];
  return map;
}

}  // namespace

const char* to_string(SynthTransform t) {
  switch (t) {
    case SynthTransform::kIdentity: return "identity";
    case SynthTransform::kPixelPermutation: return "pixel-permutation";
    case SynthTransform::kRotation: return "rotation";
    case SynthTransform::kLabelPermutation: return "label-permutation";
    case SynthTransform::kChannelNoise: return "channel-noise";
  }
  return "?";
}

SynthTransform synth_transform_from_string(const std::string& name) {
  for (auto t : {SynthTransform::kIdentity, SynthTransform::kPixelPermutation, SynthTransform::kRotation,
                 SynthTransform::kLabelPermutation, SynthTransform::kChannelNoise}) {
    if (name == to_string(t)) return t;
  }
  throw UsageError("unknown synthetic transform '" + name + "'");
}

const char* to_string(SynthStyle s) { return s == SynthStyle::kStrokes ? "strokes" : "shapes"; }

SynthStyle synth_style_from_string(const std::string& name) {
  if (name == "strokes") return SynthStyle::kStrokes;
  if (name == "shapes") return SynthStyle::kShapes;
  throw UsageError("unknown synthetic style '" + name + "'");
}

Tensor<float> synth_base_image(const SynthTaskSpec& spec, int label, std::uint64_t index) {
  const int n = spec.image_size;
  Rng rng = Rng::stream(spec.sample_seed, "sample." + std::to_string(index));
  const double shift = 0.05 * n;
  const double dx = shift * (2 * rng.uniform() - 1), dy = shift * (2 * rng.uniform() - 1);
  const double jitter = 0.025 * n;
  const double gain = 0.75 + 0.25 * rng.uniform();
  std::vector<double> plane(static_cast<std::size_t>(n * n), 0.0);
  if (spec.style == SynthStyle::kStrokes) {
    auto segs = stroke_prototype(spec, label);
    for (auto& s : segs) {
      s.x0 += dx + jitter * rng.normal();
      s.y0 += dy + jitter * rng.normal();
      s.x1 += dx + jitter * rng.normal();
      s.y1 += dy + jitter * rng.normal();
    }
    const double width = 0.045 * n * (0.8 + 0.4 * rng.uniform());
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        double v = 0.0;
        for (const auto& s : segs) {
          const double d = segment_distance(x, y, s);
          v = std::max(v, std::exp(-d * d / (2 * width * width)));
        }
        plane[static_cast<std::size_t>(y * n + x)] = v;
      }
    }
  } else {
    auto blobs = shape_prototype(spec, label);
    for (auto& b : blobs) {
      b.cx += dx + jitter * rng.normal();
      b.cy += dy + jitter * rng.normal();
      b.rx *= 1.0 + 0.1 * rng.normal();
      b.ry *= 1.0 + 0.1 * rng.normal();
      b.rx = std::max(b.rx, 1.0);
      b.ry = std::max(b.ry, 1.0);
    }
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        double v = 0.0;
        for (const auto& b : blobs) v = std::max(v, blob_value(b, x, y));
        plane[static_cast<std::size_t>(y * n + x)] = v;
      }
    }
  }
  Tensor<float> image(Shape{spec.channels, n, n});
  for (int c = 0; c < spec.channels; ++c) {
    const double cg = spec.channels == 1 ? 1.0 : 0.7 + 0.3 * rng.uniform();
    for (int i = 0; i < n * n; ++i) {
      const double v = gain * cg * plane[static_cast<std::size_t>(i)] + 0.04 * rng.normal();
      image[c * n * n + i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return image;
}

Tensor<float> synth_transform_image(const SynthTaskSpec& spec, const Tensor<float>& image,
                                    std::uint64_t index) {
  if (spec.theta == 0.0) return image;
  const int c = static_cast<int>(image.dim(0)), h = static_cast<int>(image.dim(1)),
            w = static_cast<int>(image.dim(2));
  Tensor<float> out = image;
  switch (spec.transform) {
    case SynthTransform::kIdentity:
    case SynthTransform::kLabelPermutation:
      break;
    case SynthTransform::kPixelPermutation: {
      const auto map = cycled_subset(spec.transform_seed, "pixel-permutation", Index{h} * w, spec.theta);
      for (int ch = 0; ch < c; ++ch) {
        for (Index p = 0; p < Index{h} * w; ++p) {
          out[ch * h * w + p] = image[ch * h * w + map[static_cast<std::size_t>(p)]];
        }
      }
      break;
    }
    case SynthTransform::kRotation: {
      const double a = spec.theta * spec.max_rotation_deg * std::numbers::pi / 180.0;
      const double ca = std::cos(a), sa = std::sin(a);
      const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
      for (int ch = 0; ch < c; ++ch) {
        const float* plane = image.data() + ch * h * w;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const double sx = ca * (x - cx) + sa * (y - cy) + cx;
            const double sy = -sa * (x - cx) + ca * (y - cy) + cy;
            out[(ch * h + y) * w + x] = bilinear(plane, h, w, sy, sx);
          }
        }
      }
      break;
    }
    case SynthTransform::kChannelNoise: {
      Rng rng = Rng::stream(spec.transform_seed, "channel-noise." + std::to_string(index));
      for (Index i = 0; i < out.numel(); ++i) {
        out[i] = static_cast<float>(std::clamp(out[i] + 0.5 * spec.theta * rng.normal(), 0.0, 1.0));
      }
      break;
    }
  }
  return out;
}

int synth_transform_label(const SynthTaskSpec& spec, int label) {
  if (spec.transform != SynthTransform::kLabelPermutation) return label;
  const auto map = cycled_subset(spec.transform_seed, "label-permutation", spec.num_classes, spec.theta);
  return static_cast<int>(map.at(static_cast<std::size_t>(label)));
}

TaskDataset synth_task(const SynthTaskSpec& spec) {
  if (spec.num_classes <= 0 || spec.image_size <= 0 || spec.channels <= 0) {
    throw UsageError("synth_task: invalid geometry");
  }
  if (!(spec.theta >= 0.0 && spec.theta <= 1.0)) throw UsageError("synth_task: theta must lie in [0, 1]");
  const Index n = spec.image_size, stride = Index{spec.channels} * n * n;
  auto build = [&](int count, std::uint64_t offset) {
    Dataset ds{Tensor<float>(Shape{count, spec.channels, n, n}), {}};
    for (int i = 0; i < count; ++i) {
      const int base_label = i % spec.num_classes;
      const std::uint64_t index = offset + static_cast<std::uint64_t>(i);
      const auto img = synth_transform_image(spec, synth_base_image(spec, base_label, index), index);
      ds.images.values().segment(i * stride, stride) = img.values();
      ds.labels.push_back(synth_transform_label(spec, base_label));
    }
    return ds;
  };
  TaskDataset task;
  task.name = spec.name;
  task.num_classes = spec.num_classes;
  task.channels = spec.channels;
  task.height = task.width = spec.image_size;
  task.train = build(spec.train_size, 0);
  task.test = build(spec.test_size, kTestOffset);
  return task;
}

std::vector<SynthTaskSpec> toy_vdd_stream(int train_size, int test_size) {
  SynthTaskSpec digits;
  digits.name = "digits";
  digits.base_seed = 1001;
  digits.sample_seed = 11;
  digits.train_size = train_size;
  digits.test_size = test_size;

  SynthTaskSpec permuted = digits;
  permuted.name = "digits-permuted";
  permuted.transform = SynthTransform::kPixelPermutation;
  permuted.theta = 1.0;
  permuted.sample_seed = 12;
  permuted.transform_seed = 21;

  SynthTaskSpec rotated = digits;
  rotated.name = "digits-rotated";
  rotated.transform = SynthTransform::kRotation;
  rotated.theta = 1.0;
  rotated.sample_seed = 13;

  SynthTaskSpec relabeled = digits;
  relabeled.name = "digits-relabeled";
  relabeled.transform = SynthTransform::kLabelPermutation;
  relabeled.theta = 1.0;
  relabeled.sample_seed = 14;
  relabeled.transform_seed = 22;

  SynthTaskSpec fashion = digits;
  fashion.name = "silhouettes";
  fashion.style = SynthStyle::kShapes;
  fashion.base_seed = 2002;
  fashion.sample_seed = 15;

  return {digits, permuted, rotated, relabeled, fashion};
}

}  // namespace ahip
