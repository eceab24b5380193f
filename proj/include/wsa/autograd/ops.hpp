// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "wsa/attention/attention.hpp"
#include "wsa/autograd/var.hpp"
#include "wsa/dsp/mel.hpp"
#include "wsa/dsp/stft.hpp"

// Differentiable ops with hand-written backward kernels. Complex spectrograms
// and masks are carried as real [2 x F x T] tensors (real plane, imaginary
// plane).
namespace wsa::autograd {

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b);

// a - c for a constant c of the same shape.
template <class Real>
Var<Real> sub_const(const Var<Real>& a, const BasicTensor<Real>& c);

template <class Real>
Var<Real> scale(const Var<Real>& a, double s);

// x[... x in] * w[in x out] + b[out]; accumulates in double.
template <class Real>
Var<Real> linear(const Var<Real>& x, const Var<Real>& w, const Var<Real>& b);

// Normalizes over the last axis, then applies gain and bias.
template <class Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gain, const Var<Real>& bias,
                     double eps = 1e-5);

// x * Phi(x) with the exact (erf) normal CDF.
template <class Real>
Var<Real> gelu(const Var<Real>& x);

// [B x N x H*D] <-> [B x H x N x D].
template <class Real>
Var<Real> split_heads(const Var<Real>& x, std::size_t heads);
template <class Real>
Var<Real> merge_heads(const Var<Real>& x);

// [A x B x C] -> [B x A x C].
template <class Real>
Var<Real> swap_leading(const Var<Real>& x);

template <class Real>
Var<Real> rope(const Var<Real>& x, double base = 10000.0);

// Dense attention; capture (optional) receives the batch/head-averaged map.
template <class Real>
Var<Real> full_attention(const Var<Real>& q, const Var<Real>& k, const Var<Real>& v,
                         BasicTensor<Real>* capture = nullptr);

template <class Real>
Var<Real> windowed_sink_attention(const Var<Real>& q, const Var<Real>& k, const Var<Real>& v,
                                  const Var<Real>& sink_kqv, const attention::WsaConfig& cfg);

// x[i] along the leading axis.
template <class Real>
Var<Real> select(const Var<Real>& x, std::size_t index);

// Stacks equally shaped tensors along a new leading axis.
template <class Real>
Var<Real> stack(const std::vector<Var<Real>>& xs);

// Per-band mask heads [T x 2*width] with interleaved (re, im) per bin are
// summed into a [2 x F x T] mask; bins shared by overlapping bands add up.
template <class Real>
Var<Real> band_overlap_add(const std::vector<Var<Real>>& heads, const dsp::BandSpec& bands);

// Elementwise complex product of a [2 x F x T] mask with a constant spectrogram.
template <class Real>
Var<Real> complex_mul_const(const Var<Real>& mask, const BasicComplexTensor<Real>& spec);

// Single-channel transforms: signal [len] <-> spectrogram [2 x F x T].
template <class Real>
Var<Real> stft(const Var<Real>& signal, const dsp::StftConfig& cfg);
template <class Real>
Var<Real> istft(const Var<Real>& spec, const dsp::StftConfig& cfg, std::size_t out_len);

// Scalar reductions (double-precision results; see Node::exact).
template <class Real>
Var<Real> abs_sum(const Var<Real>& a);  // subgradient sign(0) = 0
template <class Real>
Var<Real> square_sum(const Var<Real>& a);
// 1 - cos(a, b) on the flattened tensors, b constant. One zero vector gives
// cos = 0; both zero is a NumericError.
template <class Real>
Var<Real> cosine_distance(const Var<Real>& a, const BasicTensor<Real>& b);

}  // namespace wsa::autograd
