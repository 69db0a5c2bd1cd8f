#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "rsad/errors.hpp"
#include "rsad/rng.hpp"

namespace rsad {

/// Dense row-major tensor. Feature maps use (C,H,W); batches (N,C,H,W).
/// The (C, H*W) descriptor view of a feature map is index arithmetic on the
/// same buffer, no copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::int64_t> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), T(0)) {}

  Tensor(std::initializer_list<std::int64_t> shape)
      : Tensor(std::vector<std::int64_t>(shape)) {}

  static Tensor full(std::vector<std::int64_t> shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor randn(std::vector<std::int64_t> shape, Rng& rng,
                      double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = static_cast<T>(rng.normal(0.0, stddev));
    return t;
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  T& at(std::int64_t i, std::int64_t j) {
    assert(ndim() == 2);
    return data_[static_cast<std::size_t>(i * dim(1) + j)];
  }
  const T& at(std::int64_t i, std::int64_t j) const {
    return const_cast<Tensor*>(this)->at(i, j);
  }
  T& at(std::int64_t i, std::int64_t j, std::int64_t k) {
    assert(ndim() == 3);
    return data_[static_cast<std::size_t>((i * dim(1) + j) * dim(2) + k)];
  }
  const T& at(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return const_cast<Tensor*>(this)->at(i, j, k);
  }
  T& at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
    assert(ndim() == 4);
    return data_[static_cast<std::size_t>(
        ((i * dim(1) + j) * dim(2) + k) * dim(3) + l)];
  }
  const T& at(std::int64_t i, std::int64_t j, std::int64_t k,
              std::int64_t l) const {
    return const_cast<Tensor*>(this)->at(i, j, k, l);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
  void zero() { fill(T(0)); }

  /// Same buffer under a new shape; element count must match.
  Tensor reshaped(std::vector<std::int64_t> shape) const {
    Tensor t;
    t.shape_ = std::move(shape);
    if (checked_size(t.shape_) != size())
      throw InputError("reshape changes element count");
    t.data_ = data_;
    return t;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (std::int64_t i = 0; i < size(); ++i)
      t[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
    return t;
  }

 private:
  static std::int64_t checked_size(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
      if (d < 0) throw InputError("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  std::vector<std::int64_t> shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace rsad
