// SPDX-License-Identifier: Apache-2.0

#include "wsa/dsp/audio.hpp"

#include <string>

#include "wsa/core/error.hpp"

namespace wsa::dsp {

AudioBuffer::AudioBuffer(std::size_t channels, std::size_t length, double rate)
    : samples(channels, std::vector<float>(length, 0.0f)), sample_rate(rate) {}

AudioBuffer::AudioBuffer(std::vector<std::vector<float>> channel_data, double rate)
    : samples(std::move(channel_data)), sample_rate(rate) {
  validate();
}

void AudioBuffer::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("audio sample_rate must be positive");
  for (const auto& ch : samples) {
    if (ch.size() != samples.front().size()) {
      throw DimensionError("audio channels have different lengths (" +
                           std::to_string(ch.size()) + " vs " +
                           std::to_string(samples.front().size()) + ")");
    }
  }
}

std::vector<float> AudioBuffer::concatenated() const {
  std::vector<float> out;
  out.reserve(channels() * length());
  for (const auto& ch : samples) out.insert(out.end(), ch.begin(), ch.end());
  return out;
}

}  // namespace wsa::dsp
