// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace wsa::dsp {

// Inclusive STFT-bin range of one sub-band.
struct Band {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t width() const { return hi - lo + 1; }
  friend bool operator==(const Band&, const Band&) = default;
};

// Band-split table: ordered, overlapping (or touching) bands that together
// cover every bin in [0, num_bins).
struct BandSpec {
  std::size_t num_bins = 0;
  std::vector<Band> bands;

  std::size_t num_bands() const { return bands.size(); }
  // Throws DimensionError if coverage or ordering is violated.
  void validate() const;
  // How many bands contain each bin.
  std::vector<std::size_t> bin_multiplicity() const;

  friend bool operator==(const BandSpec&, const BandSpec&) = default;
};

// HTK mel scale: 2595 * log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// num_bands + 1 mel-uniform edges on [0, sample_rate/2] mapped to bins, then
// each band widened by overlap_bins on both sides and clamped to the spectrum.
BandSpec mel_band_edges(std::size_t num_bands, std::size_t fft_size, double sample_rate,
                        std::size_t overlap_bins);

// Triangular HTK-mel filters, peak 1, as a dense [num_mels x bins] table.
// Filters narrower than one bin collapse onto the bin nearest their center,
// so every filter has nonzero weight.
std::vector<std::vector<double>> mel_filterbank(std::size_t num_mels, std::size_t fft_size, double sample_rate);

}  // namespace wsa::dsp
