// SPDX-License-Identifier: Apache-2.0

#include "wsa/model/config.hpp"

#include <json.hpp>
#include <set>

#include "wsa/core/io.hpp"

namespace wsa::model {

using nlohmann::json;

std::string to_string(AttentionKind kind) { return kind == AttentionKind::full ? "full" : "wsa"; }

AttentionKind attention_kind_from_string(std::string_view name) {
  if (name == "full") return AttentionKind::full;
  if (name == "wsa") return AttentionKind::wsa;
  throw ConfigError("attention_mode must be \"full\" or \"wsa\", got \"" + std::string(name) + "\"");
}

void ModelConfig::validate() const {
  if (num_bands == 0) throw ConfigError("num_bands must be at least 1");
  if (blocks == 0) throw ConfigError("blocks must be at least 1");
  if (heads == 0 || head_dim == 0) throw ConfigError("heads and head_dim must be positive");
  if (model_dim != heads * head_dim) {
    throw ConfigError("model_dim (" + std::to_string(model_dim) + ") must equal heads * head_dim (" +
                      std::to_string(heads) + " * " + std::to_string(head_dim) + ")");
  }
  if (head_dim % 2 != 0) throw ConfigError("head_dim must be even for rotary embeddings");
  if (!(rope_base > 1.0)) throw ConfigError("rope_base must exceed 1");
  wsa.validate();
  stft.validate();
  if (num_bands > stft.bins()) {
    throw ConfigError("num_bands (" + std::to_string(num_bands) + ") exceeds the " +
                      std::to_string(stft.bins()) + " STFT bins");
  }
}

dsp::BandSpec ModelConfig::band_spec() const {
  return dsp::mel_band_edges(num_bands, stft.fft_size, stft.sample_rate, band_overlap_bins);
}

ModelConfig toy_model_config() { return ModelConfig{}; }

ModelConfig reference_model_config() {
  ModelConfig cfg;
  cfg.num_bands = 60;
  cfg.blocks = 6;
  cfg.stft = dsp::reference_stft_config();
  return cfg;
}

std::string to_json(const ModelConfig& cfg) {
  const json j = {
      {"num_bands", cfg.num_bands},
      {"model_dim", cfg.model_dim},
      {"heads", cfg.heads},
      {"head_dim", cfg.head_dim},
      {"blocks", cfg.blocks},
      {"attention_mode", to_string(cfg.attention_mode)},
      {"wsa", {{"window", cfg.wsa.window}, {"sinks", cfg.wsa.sinks}}},
      {"stft", {{"fft_size", cfg.stft.fft_size}, {"hop", cfg.stft.hop}, {"sample_rate", cfg.stft.sample_rate}}},
      {"band_overlap_bins", cfg.band_overlap_bins},
      {"rope_base", cfg.rope_base},
  };
  return j.dump();
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ModelConfig model_config_from_json(std::string_view text) {
  ModelConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    reject_unknown(j, {"num_bands", "model_dim", "heads", "head_dim", "blocks", "attention_mode", "wsa",
                       "stft", "band_overlap_bins", "rope_base"},
                   "model config");
    read(j, "num_bands", cfg.num_bands);
    read(j, "model_dim", cfg.model_dim);
    read(j, "heads", cfg.heads);
    read(j, "head_dim", cfg.head_dim);
    read(j, "blocks", cfg.blocks);
    read(j, "band_overlap_bins", cfg.band_overlap_bins);
    read(j, "rope_base", cfg.rope_base);
    if (j.contains("attention_mode")) {
      cfg.attention_mode = attention_kind_from_string(j.at("attention_mode").get<std::string>());
    }
    if (j.contains("wsa")) {
      const json& w = j.at("wsa");
      reject_unknown(w, {"window", "sinks"}, "wsa");
      read(w, "window", cfg.wsa.window);
      read(w, "sinks", cfg.wsa.sinks);
    }
    if (j.contains("stft")) {
      const json& s = j.at("stft");
      reject_unknown(s, {"fft_size", "hop", "sample_rate"}, "stft");
      read(s, "fft_size", cfg.stft.fft_size);
      read(s, "hop", cfg.stft.hop);
      read(s, "sample_rate", cfg.stft.sample_rate);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  return model_config_from_json(read_file(path));
}

}  // namespace wsa::model
