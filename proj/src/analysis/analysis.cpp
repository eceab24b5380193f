// SPDX-License-Identifier: Apache-2.0

#include "wsa/analysis/analysis.hpp"

#include <string>

#include "wsa/attention/flops.hpp"
#include "wsa/core/error.hpp"
#include "wsa/metrics/metrics.hpp"

namespace wsa::analysis {

std::vector<AttentionRecord> capture_attention(const model::SepModel& model, const dsp::AudioBuffer& audio) {
  if (model.config.attention_mode == model::AttentionKind::wsa) {
    throw ConfigError("attention capture needs a full-attention model; dense maps are unavailable under WSA");
  }
  audio.validate();
  if (audio.channels() == 0) throw DimensionError("attention capture needs at least one channel");
  const dsp::AudioBuffer mono({audio.samples.front()}, audio.sample_rate);
  autograd::ParamBinder<float> bind(false);
  std::vector<AttentionRecord> records;
  model::separate_graph(model, bind, mono, &records);
  return records;
}

namespace {

std::size_t square_size(const Tensor& map, const char* what) {
  if (map.rank() != 2 || map.dim(0) != map.dim(1)) {
    throw DimensionError(std::string(what) + " needs a square map, got " + shape_string(map.shape()));
  }
  return map.dim(0);
}

}  // namespace

double locality_mass(const Tensor& map, std::size_t w) {
  const std::size_t n = square_size(map, "locality_mass");
  if (n == 0) throw DimensionError("locality_mass of an empty map");
  const std::size_t half = w / 2;
  double mass = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    for (std::size_t j = lo; j <= hi; ++j) mass += map[i * n + j];
  }
  return mass / double(n);
}

Tensor diagonal_crop(const Tensor& map, std::size_t size) {
  const std::size_t n = square_size(map, "diagonal_crop");
  if (size == 0 || n < size) {
    throw DimensionError("cannot crop " + std::to_string(size) + " x " + std::to_string(size) + " from a " +
                         std::to_string(n) + " x " + std::to_string(n) + " map");
  }
  const std::size_t start = (n - size + 1) / 2;
  Tensor out({size, size});
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) out[i * size + j] = map[(start + i) * n + start + j];
  }
  return out;
}

std::vector<LocalityStats> locality_stats(const std::vector<AttentionRecord>& records,
                                          const std::vector<std::size_t>& windows, model::Axis axis) {
  std::vector<LocalityStats> out;
  for (std::size_t w : windows) {
    LocalityStats s;
    s.window = w;
    for (const auto& r : records) {
      if (r.axis == axis) s.per_layer.push_back(locality_mass(r.map, w));
    }
    if (s.per_layer.empty()) throw DimensionError("no attention records on the " + model::to_string(axis) + " axis");
    for (double m : s.per_layer) s.in_band_mass += m;
    s.in_band_mass /= double(s.per_layer.size());
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

double median_sdr(const model::SepModel& m, const std::vector<EvalPair>& pairs) {
  std::vector<double> sdrs;
  sdrs.reserve(pairs.size());
  for (const auto& p : pairs) sdrs.push_back(metrics::sdr(model::separate(m, p.mix).audio, p.target));
  return metrics::median(std::move(sdrs));
}

}  // namespace

std::vector<SweepRow> zero_shot_sweep(const model::SepModel& model, const std::vector<EvalPair>& pairs,
                                      const std::vector<std::size_t>& windows) {
  if (pairs.empty()) throw ConfigError("zero-shot sweep needs at least one eval pair");
  if (model.config.attention_mode == model::AttentionKind::wsa) {
    throw ConfigError("zero-shot sweep starts from a full-attention model");
  }
  const std::uint64_t frames = model.config.stft.frames(pairs.front().mix.length());

  std::vector<SweepRow> rows;
  rows.push_back({std::nullopt, median_sdr(model, pairs), 1.0});
  for (std::size_t w : windows) {
    const attention::WsaConfig cfg{w, 0};
    const model::SepModel windowed = model::convert_to_wsa(model, cfg);
    const auto flops = attention::attention_flops(frames, attention::AttentionMode::window_only, cfg);
    rows.push_back({w, median_sdr(windowed, pairs), flops.reduction_vs_full});
  }
  return rows;
}

}  // namespace wsa::analysis
