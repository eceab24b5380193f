// SPDX-License-Identifier: Apache-2.0

#include "wsa/attention/rope.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "wsa/core/error.hpp"

namespace wsa::attention {

template <class Real>
BasicTensor<Real> rope_rotate(const BasicTensor<Real>& x, double base, bool inverse) {
  if (x.rank() < 2) throw DimensionError("rope expects [... x N x D], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(x.rank() - 2), d = x.dim(x.rank() - 1);
  if (d % 2 != 0) throw DimensionError("rope needs an even head dimension, got " + std::to_string(d));
  const std::size_t outer = n == 0 || d == 0 ? 0 : x.size() / (n * d);

  // cos/sin table per (position, pair), computed in double.
  std::vector<Real> cos_t(n * d / 2), sin_t(n * d / 2);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t t = 0; t < d / 2; ++t) {
      const double freq = std::pow(base, -2.0 * static_cast<double>(t) / static_cast<double>(d));
      const double angle = (inverse ? -1.0 : 1.0) * static_cast<double>(p) * freq;
      cos_t[p * d / 2 + t] = static_cast<Real>(std::cos(angle));
      sin_t[p * d / 2 + t] = static_cast<Real>(std::sin(angle));
    }
  }

  BasicTensor<Real> out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t p = 0; p < n; ++p) {
      const Real* in = x.raw() + (o * n + p) * d;
      Real* dst = out.raw() + (o * n + p) * d;
      for (std::size_t t = 0; t < d / 2; ++t) {
        const Real c = cos_t[p * d / 2 + t], s = sin_t[p * d / 2 + t];
        const Real a = in[2 * t], b = in[2 * t + 1];
        dst[2 * t] = a * c - b * s;
        dst[2 * t + 1] = a * s + b * c;
      }
    }
  }
  return out;
}

template BasicTensor<float> rope_rotate(const BasicTensor<float>&, double, bool);
template BasicTensor<double> rope_rotate(const BasicTensor<double>&, double, bool);

}  // namespace wsa::attention
