#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "ahip/numerics/errors.hpp"

namespace ahip {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline Index shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1},
                         [](Index a, Index b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array. The last dimension is the "feature" axis: every
/// tensor can be viewed as a matrix with `cols() == shape.back()` and all
/// leading dimensions folded into rows.
template <typename Scalar>
class Tensor {
 public:
  using Matrix = RowMatrix<Scalar>;
  using Vector = VectorX<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(Vector::Zero(shape_numel(shape_))) {}

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor filled(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  template <typename Derived>
  static Tensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    Tensor t(Shape{m.rows(), m.cols()});
    t.matrix() = m;
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index numel() const { return data_.size(); }
  Index cols() const { return shape_.empty() ? 1 : shape_.back(); }
  Index rows() const { return cols() == 0 ? 0 : numel() / cols(); }
  bool empty() const { return data_.size() == 0; }

  Eigen::Map<Matrix> matrix() { return {data_.data(), rows(), cols()}; }
  Eigen::Map<const Matrix> matrix() const { return {data_.data(), rows(), cols()}; }

  Vector& values() { return data_; }
  const Vector& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != numel()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                           shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  /// Hash of shape and raw bytes; equal hashes stand in for bit equality.
  std::uint64_t content_hash() const;

  /// Bitwise equality of shape and payload.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ &&
           (a.numel() == 0 ||
            std::memcmp(a.data(), b.data(),
                        static_cast<std::size_t>(a.numel()) * sizeof(Scalar)) == 0);
  }

 private:
  Shape shape_;
  Vector data_;
};

}  // namespace ahip

#include "ahip/numerics/rng.hpp"

namespace ahip {

/// Samples [begin, begin + count) along the leading dimension.
template <typename Scalar>
Tensor<Scalar> slice_leading(const Tensor<Scalar>& t, Index begin, Index count) {
  if (t.rank() == 0 || begin < 0 || count < 0 || begin + count > t.dim(0)) {
    throw DimensionError("slice_leading: range out of bounds for " + shape_string(t.shape()));
  }
  const Index stride = t.dim(0) == 0 ? 0 : t.numel() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = count;
  return Tensor<Scalar>(shape, t.values().segment(begin * stride, count * stride));
}

template <typename Scalar>
std::uint64_t Tensor<Scalar>::content_hash() const {
  std::uint64_t h = fnv1a64(shape_.data(), shape_.size() * sizeof(Index));
  return fnv1a64(data_.data(), static_cast<std::size_t>(data_.size()) * sizeof(Scalar), h);
}

}  // namespace ahip
