// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wsa/core/error.hpp"

namespace wsa {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array with an explicit shape. Instantiated for float (the
// engine's working precision) and double (gradient verification mode).
template <class Real>
class BasicTensor {
 public:
  using value_type = Real;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<Real> data);

  static BasicTensor full(Shape shape, Real value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real* raw() { return data_.data(); }
  const Real* raw() const { return data_.data(); }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  // Row-major element access for rank-2 tensors.
  Real& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  Real at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  BasicTensor reshaped(Shape shape) const;
  void fill(Real value);
  bool all_finite() const;

  template <class To>
  BasicTensor<To> cast() const {
    std::vector<To> out(data_.begin(), data_.end());
    return BasicTensor<To>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

using Tensor = BasicTensor<float>;

// Complex array stored as separate real and imaginary planes.
template <class Real>
class BasicComplexTensor {
 public:
  BasicComplexTensor() = default;
  explicit BasicComplexTensor(Shape shape);
  BasicComplexTensor(Shape shape, std::vector<Real> re, std::vector<Real> im);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return re_.size(); }

  std::span<Real> re() { return re_; }
  std::span<const Real> re() const { return re_; }
  std::span<Real> im() { return im_; }
  std::span<const Real> im() const { return im_; }

  template <class To>
  BasicComplexTensor<To> cast() const {
    return BasicComplexTensor<To>(shape_, std::vector<To>(re_.begin(), re_.end()),
                                  std::vector<To>(im_.begin(), im_.end()));
  }

  friend bool operator==(const BasicComplexTensor&, const BasicComplexTensor&) = default;

 private:
  Shape shape_;
  std::vector<Real> re_;
  std::vector<Real> im_;
};

using ComplexTensor = BasicComplexTensor<float>;

// Matrix product of a[m x k] and b[k x n].
template <class Real>
BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

// Row-wise softmax of a rank-2 tensor. Entries equal to -inf are masked and
// map to exactly zero. Throws NumericError for a row with no finite entry.
template <class Real>
BasicTensor<Real> softmax_rows(const BasicTensor<Real>& scores);

// Largest |a[i] - b[i]|; throws DimensionError if shapes differ.
template <class Real>
double max_abs_diff(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

}  // namespace wsa
