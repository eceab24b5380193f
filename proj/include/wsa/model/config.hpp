// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "wsa/attention/attention.hpp"
#include "wsa/dsp/mel.hpp"
#include "wsa/dsp/stft.hpp"

namespace wsa::model {

enum class AttentionKind { full, wsa };

std::string to_string(AttentionKind kind);
AttentionKind attention_kind_from_string(std::string_view name);

struct ModelConfig {
  std::size_t num_bands = 12;
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t blocks = 2;
  AttentionKind attention_mode = AttentionKind::full;  // time layers only
  attention::WsaConfig wsa{};
  dsp::StftConfig stft{512, 128, 16000.0};
  std::size_t band_overlap_bins = 2;
  double rope_base = 10000.0;

  // model_dim == heads * head_dim, blocks >= 1, num_bands >= 1, valid STFT,
  // even head_dim (RoPE pairs), even window. Throws ConfigError.
  void validate() const;
  dsp::BandSpec band_spec() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Desk-scale defaults (12 bands, d_model 64, 4 x 16 heads, 2 blocks, 16 kHz).
ModelConfig toy_model_config();

// 60 mel bands, 6 blocks, 44.1 kHz / 2048-point / 441-hop STFT. Only the
// geometry is full-size; widths stay toy-sized.
ModelConfig reference_model_config();

// JSON sidecar form. Missing keys keep their defaults; unknown keys and
// malformed values raise ConfigError.
std::string to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text);
ModelConfig load_model_config(const std::filesystem::path& path);

}  // namespace wsa::model
