// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wsa/autograd/var.hpp"
#include "wsa/dsp/audio.hpp"
#include "wsa/model/config.hpp"

namespace wsa::model {

template <class Real>
struct LinearParams {
  BasicTensor<Real> weight;  // [in x out]
  BasicTensor<Real> bias;    // [out]
};

template <class Real>
struct NormParams {
  BasicTensor<Real> gain;
  BasicTensor<Real> bias;
};

// Pre-norm transformer layer. sink_kqv ([H x S x 3 x D]) exists only on time
// layers of WSA-mode models.
template <class Real>
struct LayerParams {
  NormParams<Real> norm1, norm2;
  LinearParams<Real> query, key, value, out;
  LinearParams<Real> ff_in, ff_out;  // d -> 4d -> d
  BasicTensor<Real> sink_kqv;
};

template <class Real>
struct BlockParams {
  LayerParams<Real> time;
  LayerParams<Real> freq;
};

// Band-split projections (band-bins*2 -> d_model), L time/frequency blocks,
// and per-band mask heads (d_model -> band-bins*2).
template <class Real>
struct BasicSepModel {
  ModelConfig config;
  dsp::BandSpec bands;
  std::vector<LinearParams<Real>> band_in;
  std::vector<BlockParams<Real>> blocks;
  std::vector<LinearParams<Real>> band_out;

  // Every parameter tensor with a stable name, in a fixed order (the order of
  // checkpoints, initialization and the optimizer state).
  std::vector<std::pair<std::string, BasicTensor<Real>*>> parameters();
  std::vector<std::pair<std::string, const BasicTensor<Real>*>> parameters() const;
  std::size_t parameter_count() const;

  template <class To>
  BasicSepModel<To> cast() const;
};

using SepModel = BasicSepModel<float>;

// Parameters shaped for cfg: zero weights, unit layer-norm gains.
template <class Real>
BasicSepModel<Real> make_model(const ModelConfig& cfg);

// Uniform(+-1/sqrt(fan_in)) weights and biases, deterministic per seed. Sinks
// of a WSA-mode config use fan_in = head_dim.
SepModel init_toy_model(const ModelConfig& cfg, std::uint64_t seed);

// Copy of a full-mode model whose time layers use windowed sink attention with
// zero-initialized sinks. Frequency layers are untouched. Throws ConfigError
// if the model already uses WSA.
SepModel convert_to_wsa(const SepModel& model, const attention::WsaConfig& cfg);

enum class Axis { time, frequency };
std::string to_string(Axis axis);

// Head-averaged dense attention map of one site ([seq x seq]); time maps are
// also averaged over bands, frequency maps over frames.
struct AttentionRecord {
  std::size_t layer_index = 0;
  Axis axis = Axis::time;
  Tensor map;
  std::size_t seq_len = 0;
};

struct AttentionSite {
  std::size_t layer_index = 0;
  Axis axis = Axis::time;
  std::size_t seq_len = 0;
};

// The 2L attention sites of a model processing `frames` STFT frames, in
// execution order (time, frequency, time, ...).
std::vector<AttentionSite> attention_sites(const ModelConfig& cfg, std::size_t frames);

// ---- forward pass pieces (graph form) ------------------------------------

// spec [F x T] -> features [N_b x T x d_model].
template <class Real>
autograd::Var<Real> band_split(const BasicSepModel<Real>& model, autograd::ParamBinder<Real>& bind,
                               const BasicComplexTensor<Real>& spec);

// One pre-norm layer over x [batch x seq x d_model]: attention across seq for
// each batch row. Full attention when wsa == nullptr.
template <class Real>
autograd::Var<Real> transformer_layer(const LayerParams<Real>& layer, const ModelConfig& cfg,
                                      autograd::ParamBinder<Real>& bind, const autograd::Var<Real>& x,
                                      const attention::WsaConfig* wsa, BasicTensor<Real>* capture);

// Attention over T' within each band, per the model's attention mode.
template <class Real>
autograd::Var<Real> time_layer(const BasicSepModel<Real>& model, std::size_t block,
                               autograd::ParamBinder<Real>& bind, const autograd::Var<Real>& x,
                               std::vector<AttentionRecord>* capture = nullptr);

// Full attention over the N_b bands within each frame.
template <class Real>
autograd::Var<Real> freq_layer(const BasicSepModel<Real>& model, std::size_t block,
                               autograd::ParamBinder<Real>& bind, const autograd::Var<Real>& x,
                               std::vector<AttentionRecord>* capture = nullptr);

// features [N_b x T x d_model] -> mask [2 x F x T] (overlapping bins summed).
template <class Real>
autograd::Var<Real> estimate_masks(const BasicSepModel<Real>& model, autograd::ParamBinder<Real>& bind,
                                   const autograd::Var<Real>& x);

// Full mask network on one channel's spectrogram.
template <class Real>
autograd::Var<Real> mask_network(const BasicSepModel<Real>& model, autograd::ParamBinder<Real>& bind,
                                 const BasicComplexTensor<Real>& spec,
                                 std::vector<AttentionRecord>* capture = nullptr);

template <class Real>
struct SeparationGraph {
  std::vector<autograd::Var<Real>> audio;  // per channel, [len]
  std::vector<autograd::Var<Real>> masks;  // per channel, [2 x F x T]
};

// Channels are separated independently. Attention maps (if requested) are
// captured from channel 0 only. Throws ConfigError on a sample-rate mismatch.
template <class Real>
SeparationGraph<Real> separate_graph(const BasicSepModel<Real>& model, autograd::ParamBinder<Real>& bind,
                                     const dsp::AudioBuffer& mix,
                                     std::vector<AttentionRecord>* capture = nullptr);

struct Separation {
  dsp::AudioBuffer audio;
  ComplexTensor mask;  // [C x F x T]
};

Separation separate(const SepModel& model, const dsp::AudioBuffer& mix);

}  // namespace wsa::model
