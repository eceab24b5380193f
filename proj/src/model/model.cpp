// SPDX-License-Identifier: Apache-2.0

#include "wsa/model/model.hpp"

#include <cmath>

#include "wsa/autograd/ops.hpp"
#include "wsa/core/rng.hpp"

namespace wsa::model {

using autograd::ParamBinder;
using autograd::Var;

namespace {

template <class Real>
LinearParams<Real> make_linear(std::size_t in, std::size_t out) {
  return {BasicTensor<Real>({in, out}), BasicTensor<Real>({out})};
}

template <class Real>
LayerParams<Real> make_layer(const ModelConfig& cfg, bool with_sinks) {
  const std::size_t d = cfg.model_dim;
  LayerParams<Real> p;
  p.norm1 = {BasicTensor<Real>::full({d}, Real(1)), BasicTensor<Real>({d})};
  p.norm2 = {BasicTensor<Real>::full({d}, Real(1)), BasicTensor<Real>({d})};
  p.query = make_linear<Real>(d, d);
  p.key = make_linear<Real>(d, d);
  p.value = make_linear<Real>(d, d);
  p.out = make_linear<Real>(d, d);
  p.ff_in = make_linear<Real>(d, 4 * d);
  p.ff_out = make_linear<Real>(4 * d, d);
  if (with_sinks) p.sink_kqv = BasicTensor<Real>({cfg.heads, cfg.wsa.sinks, 3, cfg.head_dim});
  return p;
}

template <class Model, class Out>
void collect(Model& m, Out& out) {
  auto add_linear = [&](const std::string& name, auto& lin) {
    out.emplace_back(name + ".weight", &lin.weight);
    out.emplace_back(name + ".bias", &lin.bias);
  };
  auto add_layer = [&](const std::string& name, auto& layer, bool sinks) {
    out.emplace_back(name + ".norm1.gain", &layer.norm1.gain);
    out.emplace_back(name + ".norm1.bias", &layer.norm1.bias);
    add_linear(name + ".query", layer.query);
    add_linear(name + ".key", layer.key);
    add_linear(name + ".value", layer.value);
    add_linear(name + ".out", layer.out);
    out.emplace_back(name + ".norm2.gain", &layer.norm2.gain);
    out.emplace_back(name + ".norm2.bias", &layer.norm2.bias);
    add_linear(name + ".ff_in", layer.ff_in);
    add_linear(name + ".ff_out", layer.ff_out);
    if (sinks) out.emplace_back(name + ".sink_kqv", &layer.sink_kqv);
  };
  const bool wsa = m.config.attention_mode == AttentionKind::wsa;
  for (std::size_t b = 0; b < m.band_in.size(); ++b) add_linear("band_in." + std::to_string(b), m.band_in[b]);
  for (std::size_t l = 0; l < m.blocks.size(); ++l) {
    add_layer("blocks." + std::to_string(l) + ".time", m.blocks[l].time, wsa);
    add_layer("blocks." + std::to_string(l) + ".freq", m.blocks[l].freq, false);
  }
  for (std::size_t b = 0; b < m.band_out.size(); ++b) add_linear("band_out." + std::to_string(b), m.band_out[b]);
}

}  // namespace

template <class Real>
std::vector<std::pair<std::string, BasicTensor<Real>*>> BasicSepModel<Real>::parameters() {
  std::vector<std::pair<std::string, BasicTensor<Real>*>> out;
  collect(*this, out);
  return out;
}

template <class Real>
std::vector<std::pair<std::string, const BasicTensor<Real>*>> BasicSepModel<Real>::parameters() const {
  std::vector<std::pair<std::string, const BasicTensor<Real>*>> out;
  collect(*this, out);
  return out;
}

template <class Real>
std::size_t BasicSepModel<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t->size();
  return n;
}

template <class Real>
template <class To>
BasicSepModel<To> BasicSepModel<Real>::cast() const {
  BasicSepModel<To> out = make_model<To>(config);
  auto dst = out.parameters();
  auto src = parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<To>();
  return out;
}

template <class Real>
BasicSepModel<Real> make_model(const ModelConfig& cfg) {
  cfg.validate();
  BasicSepModel<Real> m;
  m.config = cfg;
  m.bands = cfg.band_spec();
  const bool wsa = cfg.attention_mode == AttentionKind::wsa;
  for (const auto& band : m.bands.bands) {
    m.band_in.push_back(make_linear<Real>(2 * band.width(), cfg.model_dim));
    m.band_out.push_back(make_linear<Real>(cfg.model_dim, 2 * band.width()));
  }
  for (std::size_t l = 0; l < cfg.blocks; ++l) {
    m.blocks.push_back({make_layer<Real>(cfg, wsa), make_layer<Real>(cfg, false)});
  }
  return m;
}

SepModel init_toy_model(const ModelConfig& cfg, std::uint64_t seed) {
  SepModel m = make_model<float>(cfg);
  Rng rng(seed);
  std::size_t fan_in = 1;
  for (auto& [name, t] : m.parameters()) {
    if (name.find(".norm") != std::string::npos) continue;  // unit gain, zero bias
    if (name.ends_with(".sink_kqv")) {
      fan_in = cfg.head_dim;
    } else if (t->rank() == 2) {
      fan_in = t->dim(0);  // each bias follows its weight and shares the bound
    }
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (auto& x : t->data()) x = static_cast<float>(rng.uniform(-bound, bound));
  }
  return m;
}

SepModel convert_to_wsa(const SepModel& model, const attention::WsaConfig& cfg) {
  if (model.config.attention_mode == AttentionKind::wsa) {
    throw ConfigError("model already uses windowed sink attention");
  }
  cfg.validate();
  SepModel out = model;
  out.config.attention_mode = AttentionKind::wsa;
  out.config.wsa = cfg;
  for (auto& block : out.blocks) {
    block.time.sink_kqv = Tensor({model.config.heads, cfg.sinks, 3, model.config.head_dim});
  }
  return out;
}

std::string to_string(Axis axis) { return axis == Axis::time ? "time" : "frequency"; }

std::vector<AttentionSite> attention_sites(const ModelConfig& cfg, std::size_t frames) {
  std::vector<AttentionSite> sites;
  for (std::size_t l = 0; l < cfg.blocks; ++l) {
    sites.push_back({l, Axis::time, frames});
    sites.push_back({l, Axis::frequency, cfg.num_bands});
  }
  return sites;
}

template <class Real>
Var<Real> band_split(const BasicSepModel<Real>& model, ParamBinder<Real>& bind,
                     const BasicComplexTensor<Real>& spec) {
  const auto& bands = model.bands;
  if (spec.rank() != 2 || spec.dim(0) != bands.num_bins) {
    throw DimensionError("band_split: spectrogram " + shape_string(spec.shape()) + " does not match " +
                         std::to_string(bands.num_bins) + " band-table bins");
  }
  const std::size_t frames = spec.dim(1);
  const auto re = spec.re();
  const auto im = spec.im();
  std::vector<Var<Real>> per_band;
  for (std::size_t b = 0; b < bands.num_bands(); ++b) {
    const auto& band = bands.bands[b];
    const std::size_t w = band.width();
    BasicTensor<Real> feats({frames, 2 * w});
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = band.lo; f <= band.hi; ++f) {
        feats[t * 2 * w + 2 * (f - band.lo)] = re[f * frames + t];
        feats[t * 2 * w + 2 * (f - band.lo) + 1] = im[f * frames + t];
      }
    }
    const auto& lin = model.band_in[b];
    per_band.push_back(autograd::linear(Var<Real>::constant(std::move(feats)), bind(lin.weight), bind(lin.bias)));
  }
  return autograd::stack(per_band);
}

template <class Real>
Var<Real> transformer_layer(const LayerParams<Real>& p, const ModelConfig& cfg, ParamBinder<Real>& bind,
                            const Var<Real>& x, const attention::WsaConfig* wsa, BasicTensor<Real>* capture) {
  using namespace autograd;
  if (x.shape().size() != 3 || x.shape()[2] != cfg.model_dim) {
    throw DimensionError("transformer layer input " + shape_string(x.shape()) + " does not end in d_model " +
                         std::to_string(cfg.model_dim));
  }
  auto proj = [&](const Var<Real>& in, const LinearParams<Real>& lin) {
    return linear(in, bind(lin.weight), bind(lin.bias));
  };
  const Var<Real> h = layer_norm(x, bind(p.norm1.gain), bind(p.norm1.bias));
  const Var<Real> q = rope(split_heads(proj(h, p.query), cfg.heads), cfg.rope_base);
  const Var<Real> k = rope(split_heads(proj(h, p.key), cfg.heads), cfg.rope_base);
  const Var<Real> v = split_heads(proj(h, p.value), cfg.heads);
  const Var<Real> a = wsa ? windowed_sink_attention(q, k, v, bind(p.sink_kqv), *wsa)
                          : full_attention(q, k, v, capture);
  const Var<Real> x1 = add(x, proj(merge_heads(a), p.out));
  const Var<Real> h2 = layer_norm(x1, bind(p.norm2.gain), bind(p.norm2.bias));
  return add(x1, proj(gelu(proj(h2, p.ff_in)), p.ff_out));
}

namespace {

template <class Real>
void record(std::vector<AttentionRecord>* capture, std::size_t block, Axis axis, const BasicTensor<Real>& map) {
  if (!capture) return;
  capture->push_back({block, axis, map.template cast<float>(), map.dim(0)});
}

}  // namespace

template <class Real>
Var<Real> time_layer(const BasicSepModel<Real>& model, std::size_t block, ParamBinder<Real>& bind,
                     const Var<Real>& x, std::vector<AttentionRecord>* capture) {
  const auto& cfg = model.config;
  const bool wsa = cfg.attention_mode == AttentionKind::wsa;
  if (wsa && capture) throw ConfigError("dense attention maps are unavailable in windowed sink attention mode");
  BasicTensor<Real> map;
  auto out = transformer_layer(model.blocks.at(block).time, cfg, bind, x, wsa ? &cfg.wsa : nullptr,
                               capture ? &map : nullptr);
  record(capture, block, Axis::time, map);
  return out;
}

template <class Real>
Var<Real> freq_layer(const BasicSepModel<Real>& model, std::size_t block, ParamBinder<Real>& bind,
                     const Var<Real>& x, std::vector<AttentionRecord>* capture) {
  BasicTensor<Real> map;
  const auto swapped = autograd::swap_leading(x);
  auto out = transformer_layer(model.blocks.at(block).freq, model.config, bind, swapped, nullptr,
                               capture ? &map : nullptr);
  record(capture, block, Axis::frequency, map);
  return autograd::swap_leading(out);
}

template <class Real>
Var<Real> estimate_masks(const BasicSepModel<Real>& model, ParamBinder<Real>& bind, const Var<Real>& x) {
  const std::size_t nb = model.bands.num_bands();
  if (x.shape().size() != 3 || x.shape()[0] != nb || x.shape()[2] != model.config.model_dim) {
    throw DimensionError("estimate_masks: features " + shape_string(x.shape()) + " do not match " +
                         std::to_string(nb) + " bands x d_model " + std::to_string(model.config.model_dim));
  }
  std::vector<Var<Real>> heads;
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& lin = model.band_out[b];
    heads.push_back(autograd::linear(autograd::select(x, b), bind(lin.weight), bind(lin.bias)));
  }
  return autograd::band_overlap_add(heads, model.bands);
}

template <class Real>
Var<Real> mask_network(const BasicSepModel<Real>& model, ParamBinder<Real>& bind,
                       const BasicComplexTensor<Real>& spec, std::vector<AttentionRecord>* capture) {
  Var<Real> x = band_split(model, bind, spec);
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    x = time_layer(model, l, bind, x, capture);
    x = freq_layer(model, l, bind, x, capture);
  }
  return estimate_masks(model, bind, x);
}

template <class Real>
SeparationGraph<Real> separate_graph(const BasicSepModel<Real>& model, ParamBinder<Real>& bind,
                                     const dsp::AudioBuffer& mix, std::vector<AttentionRecord>* capture) {
  mix.validate();
  const auto& stft_cfg = model.config.stft;
  if (mix.sample_rate != stft_cfg.sample_rate) {
    throw ConfigError("input sample rate " + std::to_string(mix.sample_rate) + " Hz does not match the model's " +
                      std::to_string(stft_cfg.sample_rate) + " Hz");
  }
  SeparationGraph<Real> out;
  for (std::size_t c = 0; c < mix.channels(); ++c) {
    const std::vector<Real> samples(mix.samples[c].begin(), mix.samples[c].end());
    const auto spec = dsp::stft_channel<Real>(samples, stft_cfg);
    const Var<Real> mask = mask_network(model, bind, spec, c == 0 ? capture : nullptr);
    out.audio.push_back(autograd::istft(autograd::complex_mul_const(mask, spec), stft_cfg, samples.size()));
    out.masks.push_back(mask);
  }
  return out;
}

Separation separate(const SepModel& model, const dsp::AudioBuffer& mix) {
  ParamBinder<float> bind(false);
  const auto graph = separate_graph(model, bind, mix);
  Separation out;
  out.audio.sample_rate = mix.sample_rate;
  const std::size_t bins = model.config.stft.bins();
  const std::size_t frames = model.config.stft.frames(mix.length());
  out.mask = ComplexTensor({mix.channels(), bins, frames});
  const std::size_t n = bins * frames;
  for (std::size_t c = 0; c < mix.channels(); ++c) {
    const auto audio = graph.audio[c].value().data();
    out.audio.samples.emplace_back(audio.begin(), audio.end());
    const float* m = graph.masks[c].value().raw();
    std::copy_n(m, n, out.mask.re().begin() + c * n);
    std::copy_n(m + n, n, out.mask.im().begin() + c * n);
  }
  return out;
}

#define WSA_INSTANTIATE(Real)                                                                           \
  template struct BasicSepModel<Real>;                                                                  \
  template BasicSepModel<Real> make_model<Real>(const ModelConfig&);                                    \
  template Var<Real> band_split(const BasicSepModel<Real>&, ParamBinder<Real>&,                         \
                                const BasicComplexTensor<Real>&);                                       \
  template Var<Real> transformer_layer(const LayerParams<Real>&, const ModelConfig&, ParamBinder<Real>&, \
                                       const Var<Real>&, const attention::WsaConfig*, BasicTensor<Real>*); \
  template Var<Real> time_layer(const BasicSepModel<Real>&, std::size_t, ParamBinder<Real>&,            \
                                const Var<Real>&, std::vector<AttentionRecord>*);                       \
  template Var<Real> freq_layer(const BasicSepModel<Real>&, std::size_t, ParamBinder<Real>&,            \
                                const Var<Real>&, std::vector<AttentionRecord>*);                       \
  template Var<Real> estimate_masks(const BasicSepModel<Real>&, ParamBinder<Real>&, const Var<Real>&);  \
  template Var<Real> mask_network(const BasicSepModel<Real>&, ParamBinder<Real>&,                       \
                                  const BasicComplexTensor<Real>&, std::vector<AttentionRecord>*);      \
  template SeparationGraph<Real> separate_graph(const BasicSepModel<Real>&, ParamBinder<Real>&,         \
                                                const dsp::AudioBuffer&, std::vector<AttentionRecord>*);

WSA_INSTANTIATE(float)
WSA_INSTANTIATE(double)

#undef WSA_INSTANTIATE

template BasicSepModel<double> BasicSepModel<float>::cast<double>() const;
template BasicSepModel<float> BasicSepModel<double>::cast<float>() const;
template BasicSepModel<float> BasicSepModel<float>::cast<float>() const;

}  // namespace wsa::model
