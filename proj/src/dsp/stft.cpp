// SPDX-License-Identifier: Apache-2.0

#include "wsa/dsp/stft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "wsa/core/error.hpp"
#include "wsa/dsp/fft.hpp"

namespace wsa::dsp {

namespace {

// Index into the original signal for a position in the center-padded signal.
std::size_t reflect_index(std::ptrdiff_t padded_pos, std::size_t pad, std::size_t len) {
  std::ptrdiff_t idx = padded_pos - static_cast<std::ptrdiff_t>(pad);
  if (len == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (len - 1));
  idx = std::abs(idx) % period;
  if (idx >= static_cast<std::ptrdiff_t>(len)) idx = period - idx;
  return static_cast<std::size_t>(idx);
}

template <class Real>
std::vector<Real> window_sum_squares(const std::vector<Real>& window, std::size_t hop,
                                     std::size_t frames) {
  const std::size_t n = window.size();
  std::vector<Real> wss((frames - 1) * hop + n, Real(0));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) wss[t * hop + i] += window[i] * window[i];
  }
  return wss;
}

void check_spec(const Shape& shape, const StftConfig& cfg) {
  if (shape.size() != 2 || shape[0] != cfg.bins() || shape[1] == 0) {
    throw DimensionError("spectrogram shape " + shape_string(shape) +
                         " inconsistent with fft_size " + std::to_string(cfg.fft_size));
  }
}

}  // namespace

void StftConfig::validate() const {
  if (!is_power_of_two(fft_size) || fft_size < 4) {
    throw ConfigError("fft_size must be a power of two >= 4, got " + std::to_string(fft_size));
  }
  if (hop == 0 || hop > fft_size / 2) {
    throw ConfigError("hop must lie in [1, fft_size/2], got " + std::to_string(hop));
  }
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
}

StftConfig reference_stft_config() { return StftConfig{2048, 441, 44100.0}; }

std::vector<StftConfig> loss_resolutions(double sample_rate) {
  std::vector<StftConfig> out;
  for (std::size_t n : {512u, 1024u, 2048u}) out.push_back(StftConfig{n, n / 4, sample_rate});
  return out;
}

template <class Real>
std::vector<Real> hann_window(std::size_t size) {
  std::vector<Real> w(size);
  for (std::size_t i = 0; i < size; ++i) {
    w[i] = static_cast<Real>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(size)));
  }
  return w;
}

template <class Real>
BasicComplexTensor<Real> stft_channel(std::span<const Real> signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.empty()) throw DimensionError("stft of an empty signal");
  const std::size_t n = cfg.fft_size, pad = n / 2, bins = cfg.bins();
  const std::size_t frames = cfg.frames(signal.size());
  const auto window = hann_window<double>(n);
  const FftPlan<double> plan(n);

  BasicComplexTensor<Real> out({bins, frames});
  std::vector<std::complex<double>> buf(n);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = reflect_index(static_cast<std::ptrdiff_t>(t * cfg.hop + i), pad, signal.size());
      buf[i] = {signal[src] * window[i], 0.0};
    }
    plan.forward(buf);
    for (std::size_t k = 0; k < bins; ++k) {
      out.re()[k * frames + t] = static_cast<Real>(buf[k].real());
      out.im()[k * frames + t] = static_cast<Real>(buf[k].imag());
    }
  }
  return out;
}

template <class Real>
std::vector<Real> istft_channel(const BasicComplexTensor<Real>& spec, const StftConfig& cfg,
                                std::size_t out_len) {
  cfg.validate();
  check_spec(spec.shape(), cfg);
  const std::size_t n = cfg.fft_size, pad = n / 2, bins = cfg.bins();
  const std::size_t frames = spec.dim(1);
  const std::size_t padded_len = (frames - 1) * cfg.hop + n;
  if (out_len + pad > padded_len) {
    throw DimensionError("istft: " + std::to_string(frames) + " frames cannot produce " +
                         std::to_string(out_len) + " samples");
  }
  const auto window = hann_window<double>(n);
  const auto wss = window_sum_squares(window, cfg.hop, frames);
  const FftPlan<double> plan(n);

  std::vector<double> acc(padded_len, 0.0);
  std::vector<std::complex<double>> buf(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      buf[k] = {spec.re()[k * frames + t], spec.im()[k * frames + t]};
    }
    buf[0].imag(0.0);
    buf[n / 2].imag(0.0);
    for (std::size_t k = 1; k < n / 2; ++k) buf[n - k] = std::conj(buf[k]);
    plan.inverse(buf);
    for (std::size_t i = 0; i < n; ++i) acc[t * cfg.hop + i] += buf[i].real() * inv_n * window[i];
  }
  std::vector<Real> out(out_len);
  for (std::size_t m = 0; m < out_len; ++m) out[m] = static_cast<Real>(acc[m + pad] / wss[m + pad]);
  return out;
}

template <class Real>
std::vector<Real> stft_channel_adjoint(const BasicComplexTensor<Real>& grad_spec,
                                       const StftConfig& cfg, std::size_t signal_len) {
  cfg.validate();
  check_spec(grad_spec.shape(), cfg);
  const std::size_t n = cfg.fft_size, pad = n / 2, bins = cfg.bins();
  const std::size_t frames = grad_spec.dim(1);
  if (frames != cfg.frames(signal_len)) {
    throw DimensionError("stft adjoint: frame count does not match signal length");
  }
  const auto window = hann_window<double>(n);
  const FftPlan<double> plan(n);

  std::vector<double> grad(signal_len, 0.0);
  std::vector<std::complex<double>> buf(n);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (std::size_t k = 0; k < bins; ++k) {
      buf[k] = {grad_spec.re()[k * frames + t], grad_spec.im()[k * frames + t]};
    }
    plan.inverse(buf);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = reflect_index(static_cast<std::ptrdiff_t>(t * cfg.hop + i), pad, signal_len);
      grad[src] += window[i] * buf[i].real();
    }
  }
  return std::vector<Real>(grad.begin(), grad.end());
}

template <class Real>
BasicComplexTensor<Real> istft_channel_adjoint(std::span<const Real> grad_out,
                                               const StftConfig& cfg, std::size_t frames) {
  cfg.validate();
  const std::size_t n = cfg.fft_size, pad = n / 2, bins = cfg.bins();
  const std::size_t padded_len = (frames - 1) * cfg.hop + n;
  if (frames == 0 || grad_out.size() + pad > padded_len) {
    throw DimensionError("istft adjoint: output length inconsistent with frame count");
  }
  const auto window = hann_window<double>(n);
  const auto wss = window_sum_squares(window, cfg.hop, frames);
  const FftPlan<double> plan(n);

  std::vector<double> grad_padded(padded_len, 0.0);
  for (std::size_t m = 0; m < grad_out.size(); ++m) grad_padded[m + pad] = grad_out[m] / wss[m + pad];

  BasicComplexTensor<Real> out({bins, frames});
  std::vector<std::complex<double>> buf(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = {grad_padded[t * cfg.hop + i] * window[i], 0.0};
    plan.forward(buf);
    for (std::size_t k = 0; k < bins; ++k) {
      const bool edge = k == 0 || k == n / 2;
      const double c = edge ? inv_n : 2 * inv_n;
      out.re()[k * frames + t] = static_cast<Real>(c * buf[k].real());
      out.im()[k * frames + t] = edge ? Real(0) : static_cast<Real>(c * buf[k].imag());
    }
  }
  return out;
}

ComplexTensor stft(const AudioBuffer& audio, const StftConfig& cfg) {
  audio.validate();
  if (audio.length() == 0) throw DimensionError("stft of an empty audio buffer");
  const std::size_t channels = audio.channels();
  const std::size_t bins = cfg.bins(), frames = cfg.frames(audio.length());
  std::vector<float> re, im;
  re.reserve(channels * bins * frames);
  im.reserve(channels * bins * frames);
  for (const auto& ch : audio.samples) {
    auto spec = stft_channel<float>(ch, cfg);
    re.insert(re.end(), spec.re().begin(), spec.re().end());
    im.insert(im.end(), spec.im().begin(), spec.im().end());
  }
  return ComplexTensor({channels, bins, frames}, std::move(re), std::move(im));
}

AudioBuffer istft(const ComplexTensor& spec, const StftConfig& cfg, std::size_t out_len) {
  if (spec.rank() != 3) {
    throw DimensionError("istft expects [C x F x T], got " + shape_string(spec.shape()));
  }
  const std::size_t channels = spec.dim(0), bins = spec.dim(1), frames = spec.dim(2);
  const std::size_t plane = bins * frames;
  AudioBuffer out;
  out.sample_rate = cfg.sample_rate;
  for (std::size_t c = 0; c < channels; ++c) {
    ComplexTensor ch({bins, frames},
                     std::vector<float>(spec.re().begin() + c * plane, spec.re().begin() + (c + 1) * plane),
                     std::vector<float>(spec.im().begin() + c * plane, spec.im().begin() + (c + 1) * plane));
    out.samples.push_back(istft_channel<float>(ch, cfg, out_len));
  }
  return out;
}

std::vector<ComplexTensor> multi_res_stft(const AudioBuffer& audio,
                                          std::span<const StftConfig> cfgs) {
  std::vector<ComplexTensor> out;
  out.reserve(cfgs.size());
  for (const auto& cfg : cfgs) out.push_back(stft(audio, cfg));
  return out;
}

#define WSA_INSTANTIATE(Real)                                                                      \
  template std::vector<Real> hann_window<Real>(std::size_t);                                       \
  template BasicComplexTensor<Real> stft_channel(std::span<const Real>, const StftConfig&);        \
  template std::vector<Real> istft_channel(const BasicComplexTensor<Real>&, const StftConfig&,     \
                                           std::size_t);                                           \
  template std::vector<Real> stft_channel_adjoint(const BasicComplexTensor<Real>&,                 \
                                                  const StftConfig&, std::size_t);                 \
  template BasicComplexTensor<Real> istft_channel_adjoint(std::span<const Real>, const StftConfig&, \
                                                          std::size_t);

WSA_INSTANTIATE(float)
WSA_INSTANTIATE(double)

#undef WSA_INSTANTIATE

}  // namespace wsa::dsp
