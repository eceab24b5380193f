// SPDX-License-Identifier: Apache-2.0

#include "wsa/dsp/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "wsa/core/error.hpp"
#include "wsa/core/io.hpp"

namespace wsa::dsp {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <class T>
T read_le(const std::vector<char>& bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

template <class T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  const std::string file = read_file(path);
  const std::vector<char> bytes(file.begin(), file.end());
  auto fail = [&](const std::string& why) { return IoError(path.string() + ": " + why); };

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const char* data = nullptr;
  std::size_t data_len = 0;
  for (std::size_t pos = 12; pos + 8 <= bytes.size();) {
    const std::string id(bytes.data() + pos, 4);
    const auto len = read_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw fail("truncated '" + id + "' chunk");
    if (id == "fmt ") {
      if (len < 16) throw fail("fmt chunk too short");
      format = read_le<std::uint16_t>(bytes, body);
      channels = read_le<std::uint16_t>(bytes, body + 2);
      rate = read_le<std::uint32_t>(bytes, body + 4);
      bits = read_le<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible && len >= 26) format = read_le<std::uint16_t>(bytes, body + 24);
    } else if (id == "data") {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1U);
  }
  if (channels == 0 || rate == 0) throw fail("missing or empty fmt chunk");
  if (!data) throw fail("missing data chunk");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits)");
  }
  const std::size_t sample_bytes = bits / 8;
  const std::size_t frames = data_len / (sample_bytes * channels);

  AudioBuffer audio(channels, frames, static_cast<double>(rate));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const char* p = data + (i * channels + c) * sample_bytes;
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        audio.samples[c][i] = static_cast<float>(v) / 32768.0f;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        audio.samples[c][i] = v;
      }
    }
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavEncoding encoding) {
  audio.validate();
  const auto channels = static_cast<std::uint16_t>(audio.channels());
  if (channels == 0) throw IoError("refusing to write a WAV with zero channels");
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const std::uint32_t data_len = static_cast<std::uint32_t>(audio.length() * channels * (bits / 8));

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_le<std::uint32_t>(out, 36 + data_len);
  out += "WAVEfmt ";
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  put_le<std::uint16_t>(out, channels);
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * channels * (bits / 8));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  put_le<std::uint16_t>(out, bits);
  out += "data";
  put_le<std::uint32_t>(out, data_len);
  for (std::size_t i = 0; i < audio.length(); ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const float v = audio.samples[c][i];
      if (encoding == WavEncoding::pcm16) {
        const float clipped = std::clamp(v, -1.0f, 1.0f);
        put_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32767.0f)));
      } else {
        put_le<float>(out, v);
      }
    }
  }

  write_file_atomic(path, out);
}

}  // namespace wsa::dsp
