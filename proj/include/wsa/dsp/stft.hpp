// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wsa/core/tensor.hpp"
#include "wsa/dsp/audio.hpp"

namespace wsa::dsp {

// Periodic-Hann STFT geometry. Frames are centered: the signal is reflect-padded
// by fft_size/2 on both ends, so a signal of length len yields len/hop + 1 frames.
struct StftConfig {
  std::size_t fft_size = 2048;
  std::size_t hop = 441;
  double sample_rate = 44100.0;

  // fft_size a power of two; 1 <= hop <= fft_size/2 so every output sample is
  // covered by a nonzero window value (iSTFT normalization is then well defined).
  void validate() const;

  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t frames(std::size_t length) const { return length / hop + 1; }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

// 44.1 kHz, 2048-point, 441-sample (10 ms) hop: 8 s of audio gives 801 frames.
StftConfig reference_stft_config();

// Resolutions used by the multi-resolution reconstruction loss: fft sizes
// {512, 1024, 2048}, hop = fft/4.
std::vector<StftConfig> loss_resolutions(double sample_rate);

template <class Real>
std::vector<Real> hann_window(std::size_t size);

// Single-channel transforms on [F x T] complex spectrograms. Internally these
// run in double and round once on output, whatever Real is.
template <class Real>
BasicComplexTensor<Real> stft_channel(std::span<const Real> signal, const StftConfig& cfg);

template <class Real>
std::vector<Real> istft_channel(const BasicComplexTensor<Real>& spec, const StftConfig& cfg,
                                std::size_t out_len);

// Adjoints of the two linear maps above; used for reverse-mode gradients.
// stft_channel_adjoint maps d(loss)/d(re, im) onto d(loss)/d(signal).
template <class Real>
std::vector<Real> stft_channel_adjoint(const BasicComplexTensor<Real>& grad_spec,
                                       const StftConfig& cfg, std::size_t signal_len);

// istft_channel_adjoint maps d(loss)/d(output samples) onto d(loss)/d(re, im).
template <class Real>
BasicComplexTensor<Real> istft_channel_adjoint(std::span<const Real> grad_out,
                                               const StftConfig& cfg, std::size_t frames);

// Multichannel wrappers: spectrogram shape is [C x F x T].
ComplexTensor stft(const AudioBuffer& audio, const StftConfig& cfg);
AudioBuffer istft(const ComplexTensor& spec, const StftConfig& cfg, std::size_t out_len);
std::vector<ComplexTensor> multi_res_stft(const AudioBuffer& audio,
                                          std::span<const StftConfig> cfgs);

}  // namespace wsa::dsp
