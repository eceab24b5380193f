// SPDX-License-Identifier: Apache-2.0

#include "wsa/dsp/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "wsa/core/error.hpp"

namespace wsa::dsp {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

template <class Real>
FftPlan<Real>::FftPlan(std::size_t size) : size_(size), bitrev_(size), twiddles_(size / 2) {
  if (!is_power_of_two(size)) {
    throw ConfigError("FFT size must be a power of two, got " + std::to_string(size));
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < size) ++bits;
  for (std::size_t i = 0; i < size; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  for (std::size_t k = 0; k < size / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(size);
    twiddles_[k] = {static_cast<Real>(std::cos(angle)), static_cast<Real>(std::sin(angle))};
  }
}

template <class Real>
void FftPlan<Real>::transform(std::span<std::complex<Real>> data, bool inverse) const {
  if (data.size() != size_) {
    throw DimensionError("FFT buffer of length " + std::to_string(data.size()) +
                         " given to plan of size " + std::to_string(size_));
  }
  for (std::size_t i = 0; i < size_; ++i) {
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= size_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = size_ / len;
    for (std::size_t start = 0; start < size_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        std::complex<Real> w = twiddles_[j * stride];
        if (inverse) w = std::conj(w);
        const std::complex<Real> t = w * data[start + j + half];
        data[start + j + half] = data[start + j] - t;
        data[start + j] += t;
      }
    }
  }
}

template class FftPlan<float>;
template class FftPlan<double>;

}  // namespace wsa::dsp
