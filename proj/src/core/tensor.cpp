// SPDX-License-Identifier: Apache-2.0

#include "wsa/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace wsa {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class Real>
BasicTensor<Real>::BasicTensor(Shape shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), Real(0)) {}

template <class Real>
BasicTensor<Real>::BasicTensor(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

template <class Real>
BasicTensor<Real> BasicTensor<Real>::full(Shape shape, Real value) {
  BasicTensor t(std::move(shape));
  t.fill(value);
  return t;
}

template <class Real>
std::size_t BasicTensor<Real>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
  }
  return shape_[axis];
}

template <class Real>
BasicTensor<Real> BasicTensor<Real>::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return BasicTensor(std::move(shape), data_);
}

template <class Real>
void BasicTensor<Real>::fill(Real value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <class Real>
bool BasicTensor<Real>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

template <class Real>
BasicComplexTensor<Real>::BasicComplexTensor(Shape shape)
    : shape_(std::move(shape)),
      re_(shape_numel(shape_), Real(0)),
      im_(shape_numel(shape_), Real(0)) {}

template <class Real>
BasicComplexTensor<Real>::BasicComplexTensor(Shape shape, std::vector<Real> re,
                                             std::vector<Real> im)
    : shape_(std::move(shape)), re_(std::move(re)), im_(std::move(im)) {
  const auto n = shape_numel(shape_);
  if (re_.size() != n || im_.size() != n) {
    throw DimensionError("complex tensor planes (" + std::to_string(re_.size()) + ", " +
                         std::to_string(im_.size()) + ") do not match shape " +
                         shape_string(shape_));
  }
}

template <class Real>
std::size_t BasicComplexTensor<Real>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
  }
  return shape_[axis];
}

template <class Real>
BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<Real> out({m, n});
  const Real* pa = a.raw();
  const Real* pb = b.raw();
  Real* po = out.raw();
  for (std::size_t i = 0; i < m; ++i) {
    Real* row = po + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = pa[i * k + p];
      const Real* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return out;
}

template <class Real>
BasicTensor<Real> softmax_rows(const BasicTensor<Real>& scores) {
  if (scores.rank() != 2) {
    throw DimensionError("softmax_rows expects a rank-2 tensor, got " +
                         shape_string(scores.shape()));
  }
  const std::size_t rows = scores.dim(0), cols = scores.dim(1);
  BasicTensor<Real> out({rows, cols});
  constexpr Real neg_inf = -std::numeric_limits<Real>::infinity();
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* in = scores.raw() + r * cols;
    Real* o = out.raw() + r * cols;
    Real row_max = neg_inf;
    for (std::size_t c = 0; c < cols; ++c) row_max = std::max(row_max, in[c]);
    if (row_max == neg_inf) {
      throw NumericError("softmax row " + std::to_string(r) + " is fully masked");
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const Real e = in[c] == neg_inf ? Real(0) : std::exp(in[c] - row_max);
      o[c] = e;
      sum += e;
    }
    const Real inv = static_cast<Real>(1.0 / sum);
    for (std::size_t c = 0; c < cols; ++c) o[c] *= inv;
  }
  return out;
}

template <class Real>
double max_abs_diff(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

#define WSA_INSTANTIATE(Real)                                                           \
  template class BasicTensor<Real>;                                                     \
  template class BasicComplexTensor<Real>;                                              \
  template BasicTensor<Real> matmul(const BasicTensor<Real>&, const BasicTensor<Real>&); \
  template BasicTensor<Real> softmax_rows(const BasicTensor<Real>&);                    \
  template double max_abs_diff(const BasicTensor<Real>&, const BasicTensor<Real>&);

WSA_INSTANTIATE(float)
WSA_INSTANTIATE(double)

#undef WSA_INSTANTIATE

}  // namespace wsa
