// SPDX-License-Identifier: Apache-2.0

#include "wsa/dsp/mel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsa/core/error.hpp"

namespace wsa::dsp {

void BandSpec::validate() const {
  if (bands.empty() || num_bins == 0) throw DimensionError("band spec has no bands");
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const auto& band = bands[b];
    if (band.lo > band.hi || band.hi >= num_bins) {
      throw DimensionError("band " + std::to_string(b) + " range [" + std::to_string(band.lo) +
                           ", " + std::to_string(band.hi) + "] invalid for " +
                           std::to_string(num_bins) + " bins");
    }
    if (b > 0) {
      const auto& prev = bands[b - 1];
      if (band.lo < prev.lo || band.lo > prev.hi + 1) {
        throw DimensionError("band " + std::to_string(b) + " neither overlaps nor touches band " +
                             std::to_string(b - 1));
      }
    }
  }
  if (bands.front().lo != 0) throw DimensionError("band spec does not cover bin 0");
  std::size_t reach = 0;
  for (const auto& band : bands) reach = std::max(reach, band.hi);
  if (reach != num_bins - 1) throw DimensionError("band spec does not cover the top bin");
}

std::vector<std::size_t> BandSpec::bin_multiplicity() const {
  std::vector<std::size_t> count(num_bins, 0);
  for (const auto& band : bands) {
    for (std::size_t k = band.lo; k <= band.hi; ++k) ++count[k];
  }
  return count;
}

double hz_to_mel(double hz) {
  if (hz < 0.0) throw ConfigError("negative frequency " + std::to_string(hz));
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

BandSpec mel_band_edges(std::size_t num_bands, std::size_t fft_size, double sample_rate,
                        std::size_t overlap_bins) {
  const std::size_t num_bins = fft_size / 2 + 1;
  if (num_bands == 0) throw ConfigError("num_bands must be >= 1");
  if (num_bands > num_bins) {
    throw ConfigError("num_bands " + std::to_string(num_bands) + " exceeds " +
                      std::to_string(num_bins) + " STFT bins");
  }
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");

  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<std::size_t> edges(num_bands + 1);
  for (std::size_t i = 0; i <= num_bands; ++i) {
    const double hz = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(num_bands));
    const auto bin = static_cast<std::size_t>(std::lround(hz * static_cast<double>(fft_size) / sample_rate));
    edges[i] = std::min(bin, num_bins - 1);
  }
  for (std::size_t i = 1; i <= num_bands; ++i) edges[i] = std::max(edges[i], edges[i - 1]);

  BandSpec spec;
  spec.num_bins = num_bins;
  for (std::size_t b = 0; b < num_bands; ++b) {
    const std::size_t lo = edges[b];
    std::size_t hi = b + 1 == num_bands ? num_bins - 1 : std::max(lo, edges[b + 1] == 0 ? 0 : edges[b + 1] - 1);
    hi = std::max(hi, lo);
    spec.bands.push_back(Band{lo >= overlap_bins ? lo - overlap_bins : 0,
                              std::min(hi + overlap_bins, num_bins - 1)});
  }
  spec.validate();
  return spec;
}

std::vector<std::vector<double>> mel_filterbank(std::size_t num_mels, std::size_t fft_size, double sample_rate) {
  if (num_mels == 0) throw ConfigError("num_mels must be >= 1");
  if (fft_size < 2) throw ConfigError("fft_size must be >= 2");
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  const std::size_t bins = fft_size / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> points(num_mels + 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(num_mels + 1));
  }
  const double bin_hz = sample_rate / static_cast<double>(fft_size);
  std::vector<std::vector<double>> fb(num_mels, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < num_mels; ++m) {
    const double lo = points[m], mid = points[m + 1], hi = points[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      if (w > 0) {
        fb[m][k] = w;
        any = true;
      }
    }
    if (!any) fb[m][std::min(bins - 1, static_cast<std::size_t>(std::lround(mid / bin_hz)))] = 1.0;
  }
  return fb;
}

}  // namespace wsa::dsp
