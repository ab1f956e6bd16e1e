#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "ahip/taskdata/augment.hpp"
#include "ahip/taskdata/idx.hpp"
#include "ahip/taskdata/manifest.hpp"
#include "ahip/taskdata/splits.hpp"
#include "ahip/taskdata/synth.hpp"

using namespace ahip;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(AHIP_FIXTURE_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ahip_taskdata_test";
  fs::create_directories(dir);
  return dir / name;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd x = a.array() - a.mean(), y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

}  // namespace

TEST(Idx, HandcraftedFixture) {
  const Dataset ds = load_idx(fixture("four-images.idx"), fixture("four-labels.idx"));
  ASSERT_EQ(ds.images.shape(), (Shape{4, 1, 28, 28}));
  EXPECT_EQ(ds.labels, (std::vector<int>{3, 1, 4, 1}));
  for (int k = 0; k < 4; ++k) {
    for (int r = 0; r < 28; r += 9) {
      for (int c = 0; c < 28; c += 5) {
        const float expect = static_cast<float>((37 * k + 5 * r + 3 * c) % 256) / 255.0f;
        EXPECT_EQ(ds.images[((k * 28) + r) * 28 + c], expect);
      }
    }
  }
}

TEST(Idx, Errors) {
  EXPECT_THROW(load_idx_labels(fixture("bad-magic.idx")), FormatError);
  EXPECT_THROW(load_idx_labels(fixture("empty.idx")), IoError);
  EXPECT_THROW(load_idx_images(fixture("empty.idx")), IoError);
  EXPECT_THROW(load_idx_images(fixture("four-labels.idx")), FormatError);
  EXPECT_THROW(load_idx_images(fixture("does-not-exist.idx")), IoError);

  std::ifstream in(fixture("four-images.idx"), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto cut = scratch("truncated.idx");
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() - 10);
  EXPECT_THROW(load_idx_images(cut.string()), IoError);

  const auto three = scratch("three-labels.idx");
  write_idx_labels(three.string(), {1, 2, 3});
  EXPECT_THROW(load_idx(fixture("four-images.idx"), three.string()), FormatError);
}

TEST(Idx, WriteReadRoundTrip) {
  Tensor<float> images(Shape{3, 1, 5, 4});
  for (Index i = 0; i < images.numel(); ++i) images[i] = static_cast<float>(i % 256) / 255.0f;
  const auto ip = scratch("rt-images.idx"), lp = scratch("rt-labels.idx");
  write_idx_images(ip.string(), images);
  write_idx_labels(lp.string(), {0, 9, 4});
  const Dataset ds = load_idx(ip.string(), lp.string());
  EXPECT_EQ(ds.images, images);
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 9, 4}));
}

TEST(Splits, StratifiedTenPercent) {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i % 10);
  const auto [train, val] = stratified_split(labels, 0.1, 5);
  ASSERT_EQ(val.size(), 10u);
  EXPECT_EQ(train.size(), 90u);
  std::set<int> classes;
  for (Index i : val) classes.insert(labels[static_cast<std::size_t>(i)]);
  EXPECT_EQ(classes.size(), 10u);
  EXPECT_TRUE(std::is_sorted(val.begin(), val.end()));
  EXPECT_EQ(stratified_split(labels, 0.1, 5), stratified_split(labels, 0.1, 5));
  EXPECT_NE(stratified_split(labels, 0.1, 5).second, stratified_split(labels, 0.1, 6).second);
}

TEST(Splits, ZeroFractionAndValidation) {
  SynthTaskSpec spec;
  spec.train_size = 50;
  spec.test_size = 10;
  const TaskDataset base = synth_task(spec);
  const TaskDataset none = make_splits(base, 0.0, 1);
  EXPECT_TRUE(none.val.empty());
  EXPECT_EQ(none.train.size(), 50);
  const TaskDataset tenth = make_splits(base, 0.1, 1);
  EXPECT_EQ(tenth.val.size() + tenth.train.size(), 50);
  EXPECT_EQ(tenth.test.size(), 10);
  EXPECT_THROW(make_splits(base, 1.0, 1), InputError);
}

TEST(Synth, ThetaZeroIsBase) {
  SynthTaskSpec base;
  base.train_size = 200;
  base.test_size = 20;
  for (auto t : {SynthTransform::kPixelPermutation, SynthTransform::kRotation, SynthTransform::kChannelNoise}) {
    SynthTaskSpec s = base;
    s.transform = t;
    s.theta = 0.0;
    s.transform_seed = 99;
    const TaskDataset a = synth_task(base), b = synth_task(s);
    EXPECT_EQ(a.train.images, b.train.images) << to_string(t);
    EXPECT_EQ(a.train.labels, b.train.labels);
  }
  // two independent draws from the base distribution: equal means
  SynthTaskSpec other = base;
  other.sample_seed = 77;
  const auto a = synth_task(base).train.images.values().cast<double>();
  const auto b = synth_task(other).train.images.values().cast<double>();
  const double sd = std::sqrt((a.array() - a.mean()).square().mean());
  EXPECT_LT(std::abs(a.mean() - b.mean()), 4 * sd * std::sqrt(2.0 / static_cast<double>(a.size() / (28 * 28))));
}

TEST(Synth, LabelPermutationKeepsImages) {
  SynthTaskSpec base;
  base.train_size = 100;
  base.test_size = 10;
  SynthTaskSpec s = base;
  s.transform = SynthTransform::kLabelPermutation;
  s.theta = 1.0;
  const TaskDataset a = synth_task(base), b = synth_task(s);
  EXPECT_EQ(a.train.images, b.train.images);
  std::set<int> image;
  int moved = 0;
  for (int c = 0; c < 10; ++c) {
    image.insert(synth_transform_label(s, c));
    moved += synth_transform_label(s, c) != c;
  }
  EXPECT_EQ(image.size(), 10u);
  EXPECT_EQ(moved, 10);
  for (std::size_t i = 0; i < a.train.labels.size(); ++i) {
    EXPECT_EQ(b.train.labels[i], synth_transform_label(s, a.train.labels[i]));
  }
}

TEST(Synth, FullPixelPermutationDecorrelates) {
  SynthTaskSpec base;
  base.train_size = 200;
  base.test_size = 10;
  SynthTaskSpec s = base;
  s.transform = SynthTransform::kPixelPermutation;
  s.theta = 1.0;
  const TaskDataset a = synth_task(base), b = synth_task(s);
  const Index px = 28 * 28;
  double mean_r = 0.0, self_r = 0.0;
  for (Index i = 0; i < a.train.size(); ++i) {
    const Eigen::VectorXd x = a.train.images.values().segment(i * px, px).cast<double>();
    const Eigen::VectorXd y = b.train.images.values().segment(i * px, px).cast<double>();
    mean_r += correlation(x, y);
    self_r += correlation(x, x);
  }
  mean_r /= static_cast<double>(a.train.size());
  EXPECT_LT(std::abs(mean_r), 0.05);
  EXPECT_NEAR(self_r / static_cast<double>(a.train.size()), 1.0, 1e-9);
}

TEST(Synth, StreamIsDeterministicAndBalanced) {
  const auto stream = toy_vdd_stream(100, 20);
  ASSERT_EQ(stream.size(), 5u);
  EXPECT_EQ(stream[0].name, "digits");
  const TaskDataset a = synth_task(stream[4]), b = synth_task(stream[4]);
  EXPECT_EQ(a.train.images, b.train.images);
  std::vector<int> per(10, 0);
  for (int y : a.train.labels) ++per[static_cast<std::size_t>(y)];
  for (int n : per) EXPECT_EQ(n, 10);
  EXPECT_NO_THROW(a.validate());
  EXPECT_GE(a.train.images.values().minCoeff(), 0.0f);
  EXPECT_LE(a.train.images.values().maxCoeff(), 1.0f);
}

TEST(Augment, PolicyOffIsIdentity) {
  const TaskDataset t = synth_task(SynthTaskSpec{});
  const auto images = slice_leading(t.train.images, 0, 4);
  Rng rng(1);
  EXPECT_EQ(augment_batch(images, AugmentPolicy{}, rng), images);
}

TEST(Augment, FlipTwiceIsIdentity) {
  const TaskDataset t = synth_task(SynthTaskSpec{});
  const auto img = slice_leading(t.train.images, 3, 1).reshaped({1, 28, 28});
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  EXPECT_EQ(flip_vertical(flip_vertical(img)), img);
  EXPECT_NE(flip_horizontal(img), img);
}

TEST(Augment, CropKeepsGeometry) {
  const TaskDataset t = synth_task(SynthTaskSpec{});
  const auto images = slice_leading(t.train.images, 0, 6);
  AugmentPolicy p;
  p.scale_crop = p.hflip = true;
  Rng rng(2);
  const auto out = augment_batch(images, p, rng);
  EXPECT_EQ(out.shape(), images.shape());
  EXPECT_NE(out, images);
  EXPECT_EQ(crop_resize(images.reshaped({6, 28, 28}).reshaped({6, 28, 28}), 2, 3, 20, 18, 28, 28).shape(),
            (Shape{6, 28, 28}));
  EXPECT_EQ(resize(slice_leading(images, 0, 1).reshaped({1, 28, 28}), 14, 14).shape(), (Shape{1, 14, 14}));
}

TEST(EpochBatches, CoverageAndMinimum) {
  Rng a(3), b(3);
  const auto x = epoch_batches(100, 32, 1, a);
  EXPECT_EQ(x, epoch_batches(100, 32, 1, b));
  std::vector<Index> all;
  for (const auto& batch : x) all.insert(all.end(), batch.begin(), batch.end());
  std::sort(all.begin(), all.end());
  ASSERT_EQ(all.size(), 100u);
  for (Index i = 0; i < 100; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], i);
  Rng c(4);
  const auto y = epoch_batches(100, 32, 15, c);
  EXPECT_GE(y.size(), 15u);
  for (const auto& batch : y) EXPECT_EQ(batch.size(), 32u);
}

TEST(Manifest, KeyValues) {
  const auto kv = parse_key_values("# comment\na=1\n\n b = two \n");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "two");
  EXPECT_THROW(parse_key_values("a=1\na=2\n"), FormatError);
  EXPECT_THROW(parse_key_values("justtext\n"), FormatError);
}

TEST(Manifest, StreamForms) {
  const auto toy = parse_stream_manifest({{"stream", "toy-vdd"}, {"train_size", "60"}});
  ASSERT_EQ(toy.size(), 5u);
  EXPECT_TRUE(toy[0].synthetic);
  EXPECT_EQ(toy[0].synth.train_size, 60);

  const auto idx = parse_stream_manifest({{"tasks", "1"},
                                          {"task.1.name", "four"},
                                          {"task.1.kind", "idx"},
                                          {"task.1.classes", "5"},
                                          {"task.1.train_images", "four-images.idx"},
                                          {"task.1.train_labels", "four-labels.idx"},
                                          {"task.1.test_images", "four-images.idx"},
                                          {"task.1.test_labels", "four-labels.idx"}},
                                         AHIP_FIXTURE_DIR);
  ASSERT_EQ(idx.size(), 1u);
  const TaskDataset t = load_task(idx[0]);
  EXPECT_EQ(t.train.size(), 4);
  EXPECT_EQ(t.num_classes, 5);

  const auto synth = parse_stream_manifest(
      {{"tasks", "1"}, {"task.1.kind", "synth"}, {"task.1.synth.transform", "pixel-permutation"}, {"task.1.synth.theta", "1"}});
  EXPECT_EQ(synth[0].synth.transform, SynthTransform::kPixelPermutation);
  EXPECT_EQ(synth[0].synth.theta, 1.0);

  auto missing = idx[0];
  missing.train_images = fixture("nope.idx");
  EXPECT_THROW(load_task(missing), UsageError);
  EXPECT_THROW(parse_stream_manifest({{"tasks", "0"}}), UsageError);
  EXPECT_THROW(parse_stream_manifest({{"stream", "other"}}), UsageError);
  EXPECT_THROW(parse_stream_manifest({{"tasks", "1"}, {"task.1.kind", "bogus"}}), UsageError);
  EXPECT_THROW(parse_stream_manifest({{"tasks", "x"}}), UsageError);
}
