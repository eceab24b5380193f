// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace wsa::dsp {

bool is_power_of_two(std::size_t n);

// Iterative radix-2 FFT with precomputed twiddles. Unnormalized in both
// directions: inverse(forward(x)) == size() * x.
template <class Real>
class FftPlan {
 public:
  explicit FftPlan(std::size_t size);

  std::size_t size() const { return size_; }
  void forward(std::span<std::complex<Real>> data) const { transform(data, false); }
  void inverse(std::span<std::complex<Real>> data) const { transform(data, true); }

 private:
  void transform(std::span<std::complex<Real>> data, bool inverse) const;

  std::size_t size_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<Real>> twiddles_;
};

}  // namespace wsa::dsp
