// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "wsa/dsp/audio.hpp"

namespace wsa::dsp {

enum class WavEncoding { pcm16, float32 };

// Little-endian RIFF/WAVE, PCM 16-bit or IEEE float 32-bit, any channel count
// (WAVE_FORMAT_EXTENSIBLE headers are accepted on read). No resampling.
AudioBuffer read_wav(const std::filesystem::path& path);

// Writes through a temporary file and renames it into place.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::float32);

}  // namespace wsa::dsp
