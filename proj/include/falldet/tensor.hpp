#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "falldet/common.hpp"

namespace falldet {

using Shape = std::vector<int>;

inline long long shape_numel(const Shape& s) {
  long long n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

inline bool shape_eq(const Shape& a, const Shape& b) { return a == b; }

/// Dense n-dimensional array, flat row-major storage.
/// T is float for training and double for gradient checking.
template <typename T>
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<size_t>(shape_numel(shape_)), T(0));
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (static_cast<long long>(data_.size()) != shape_numel(shape_)) {
      throw ShapeError(cat("tensor data length ", data_.size(), " does not match shape ",
                           shape_str(shape_)));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  long long size() const { return static_cast<long long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

  T& operator()(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
  const T& operator()(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }

  T& operator()(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  T& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  /// Row-major reinterpretation; element order is never touched.
  Tensor reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != size()) {
      throw ShapeError(cat("cannot reshape ", shape_str(shape_), " (", size(), " values) to ",
                           shape_str(new_shape)));
    }
    return Tensor(std::move(new_shape), data_);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (int d : shape_) {
      if (d <= 0) throw ShapeError(cat("tensor dimensions must be positive, got ", shape_str(shape_)));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace falldet
