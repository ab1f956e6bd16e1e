#include "ahip/taskdata/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "ahip/numerics/errors.hpp"

namespace ahip {

namespace {

Index sample_stride(const Tensor<float>& images) {
  return images.rank() == 0 || images.dim(0) == 0 ? 0 : images.numel() / images.dim(0);
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> gather_images(const Dataset& ds, std::span<const Index> indices) {
  Shape shape = ds.images.shape();
  if (shape.empty()) throw InputError("gather_images: dataset has no images");
  const Index stride = sample_stride(ds.images);
  shape[0] = static_cast<Index>(indices.size());
  Tensor<Scalar> out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= ds.size()) throw InputError("gather_images: index out of range");
    out.values().segment(static_cast<Index>(i) * stride, stride) =
        ds.images.values().segment(indices[i] * stride, stride).template cast<Scalar>();
  }
  return out;
}

std::vector<int> gather_labels(const Dataset& ds, std::span<const Index> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (Index i : indices) out.push_back(ds.labels.at(static_cast<std::size_t>(i)));
  return out;
}

Dataset subset(const Dataset& ds, std::span<const Index> indices) {
  return {gather_images<float>(ds, indices), gather_labels(ds, indices)};
}

Dataset head_samples(const Dataset& ds, Index count) {
  std::vector<Index> idx(static_cast<std::size_t>(std::min(count, ds.size())));
  std::iota(idx.begin(), idx.end(), Index{0});
  return subset(ds, idx);
}

void TaskDataset::validate() const {
  if (num_classes <= 0) throw InputError("task " + name + ": num_classes must be positive");
  for (const Dataset* d : {&train, &val, &test}) {
    for (int y : d->labels) {
      if (y < 0 || y >= num_classes) throw InputError("task " + name + ": label out of range");
    }
    if (d->empty()) continue;
    const Shape expect{d->size(), channels, height, width};
    if (d->images.shape() != expect) {
      throw InputError("task " + name + ": image geometry " + shape_string(d->images.shape()) +
                       " != " + shape_string(expect));
    }
  }
}

std::vector<std::vector<Index>> epoch_batches(Index n, Index batch_size, Index min_batches,
                                              Rng& rng) {
  if (n <= 0 || batch_size <= 0) throw InputError("epoch_batches: empty dataset or batch");
  std::vector<Index> order;
  std::vector<Index> perm(static_cast<std::size_t>(n));
  do {
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm);
    order.insert(order.end(), perm.begin(), perm.end());
  } while (static_cast<Index>(order.size()) < min_batches * batch_size);
  const bool repeated = static_cast<Index>(order.size()) > n;
  std::vector<std::vector<Index>> batches;
  for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(batch_size));
    if (e - b < static_cast<std::size_t>(batch_size) && repeated) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return batches;
}

std::vector<std::vector<Index>> sequential_batches(Index n, Index batch_size) {
  std::vector<std::vector<Index>> batches;
  for (Index b = 0; b < n; b += batch_size) {
    std::vector<Index> idx(static_cast<std::size_t>(std::min(batch_size, n - b)));
    std::iota(idx.begin(), idx.end(), b);
    batches.push_back(std::move(idx));
  }
  return batches;
}

template Tensor<float> gather_images<float>(const Dataset&, std::span<const Index>);
template Tensor<double> gather_images<double>(const Dataset&, std::span<const Index>);

}  // namespace ahip
