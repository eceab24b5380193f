// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "wsa/dsp/audio.hpp"

namespace wsa::metrics {

struct MetricConfig {
  double sdr_cap_db = 100.0;  // results clamped to +-cap
  double eps = 1e-10;         // energy floor in both SDR terms
  double chunk_seconds = 1.0;
  std::size_t mel_bands = 80;
  double db_floor = -80.0;  // mel dB relative to the reference's peak
  std::size_t fft_size = 2048;
  std::size_t hop = 512;

  void validate() const;  // ConfigError
};

// All metrics treat a multichannel buffer as its channels laid end to end.
// Estimate and reference must agree in channel count and length
// (DimensionError otherwise).

// 10 log10((|ref|^2 + eps) / (|ref - est|^2 + eps)), clamped to +-cap.
double sdr(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg = {});

// SDR of each non-overlapping chunk (all channels of a chunk together). A
// trailing remainder shorter than half a chunk is dropped; a longer one is
// scored as its own chunk. Throws DimensionError below half a chunk.
std::vector<double> chunk_sdrs(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref,
                               const MetricConfig& cfg = {});

// Median, with the mean of the middle two for even counts. Throws
// DimensionError when empty.
double median(std::vector<double> values);

// Median of chunk_sdrs. Pool several tracks by concatenating their
// chunk_sdrs before taking the median.
double csdr(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg = {});

// Mel-power spectrograms of est and ref in dB relative to the reference's
// peak cell, floored at db_floor. Fullness penalizes the mean one-sided
// deficit max(0, ref - est), bleedless the mean excess max(0, est - ref):
// score = 100 * max(0, 1 - mean / |db_floor|).
double fullness(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg = {});
double bleedless(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg = {});

struct MetricReport {
  double sdr = 0;
  double csdr = 0;
  double fullness = 0;
  double bleedless = 0;
};

// All four; csdr is NaN when the input is shorter than half a chunk.
MetricReport evaluate(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg = {});

}  // namespace wsa::metrics
