// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace wsa::dsp {

// Multichannel PCM. All channels share one length.
struct AudioBuffer {
  std::vector<std::vector<float>> samples;
  double sample_rate = 0.0;

  AudioBuffer() = default;
  AudioBuffer(std::size_t channels, std::size_t length, double rate);
  AudioBuffer(std::vector<std::vector<float>> channel_data, double rate);

  std::size_t channels() const { return samples.size(); }
  std::size_t length() const { return samples.empty() ? 0 : samples.front().size(); }

  // Throws ConfigError/DimensionError if the invariants are broken.
  void validate() const;

  // All channels back to back; metrics operate on this view.
  std::vector<float> concatenated() const;

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;
};

}  // namespace wsa::dsp
