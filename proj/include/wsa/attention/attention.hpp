// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <type_traits>

#include "wsa/core/tensor.hpp"

namespace wsa::attention {

// Windowed sink attention geometry. Each real token attends to the tokens
// within window/2 positions of itself plus every sink; sinks attend everywhere.
struct WsaConfig {
  std::size_t window = 10;
  std::size_t sinks = 8;

  void validate() const;  // window must be even
  friend bool operator==(const WsaConfig&, const WsaConfig&) = default;
};

// Mask predicate over the sink-extended sequence, where indices 0..sinks-1 are
// the sink tokens: (i < S) || (j < S) || |i - j| <= W/2.
bool wsa_mask(std::size_t i, std::size_t j, const WsaConfig& cfg);

// [batch x heads x seq x head_dim] geometry of a q/k/v tensor.
struct AttentionDims {
  std::size_t batch = 0;
  std::size_t heads = 0;
  std::size_t seq = 0;
  std::size_t head_dim = 0;

  static AttentionDims of(const Shape& shape);
  Shape shape() const { return {batch, heads, seq, head_dim}; }
  friend bool operator==(const AttentionDims&, const AttentionDims&) = default;
};

// Allocation-counting hook. Kernels report every scratch buffer they allocate
// (in elements); tests use it to check the kernels' memory footprint.
class ScratchProbe {
 public:
  void record(std::size_t elements);
  std::size_t largest() const { return largest_.load(); }
  std::size_t allocations() const { return count_.load(); }

 private:
  std::atomic<std::size_t> largest_{0};
  std::atomic<std::size_t> count_{0};
};

using MaskFn = std::function<bool(std::size_t, std::size_t)>;

template <class Real>
struct AttentionGrads {
  BasicTensor<Real> q;
  BasicTensor<Real> k;
  BasicTensor<Real> v;
  BasicTensor<Real> sink_kqv;  // empty for full attention
};

template <class Real>
struct WsaResult {
  BasicTensor<Real> out;
  BasicTensor<Real> row_logsumexp;  // [B x H x N], consumed by the backward pass
};

// Dense softmax(QK^T / sqrt(D)) V per (batch, head). When mean_weights is
// non-null it receives the [N x N] attention weights averaged over batch and
// heads (accumulated sequentially, so capture runs are deterministic).
template <class Real>
BasicTensor<Real> full_attention(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                 const BasicTensor<Real>& v,
                                 std::type_identity_t<BasicTensor<Real>>* mean_weights = nullptr,
                                 ScratchProbe* probe = nullptr);

template <class Real>
AttentionGrads<Real> full_attention_backward(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                             const BasicTensor<Real>& v,
                                             const BasicTensor<Real>& grad_out);

// Reference implementation: materializes the N x N score matrix with -inf
// outside the mask, then softmax and AV. weights_out (optional) receives the
// [B x H x N x N] attention weights.
template <class Real>
BasicTensor<Real> masked_attention_oracle(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                          const BasicTensor<Real>& v, const MaskFn& mask,
                                          std::type_identity_t<BasicTensor<Real>>* weights_out = nullptr);

// Windowed sink attention without the N x N matrix.
//
// sink_kqv is [H x S x 3 x D]: for each head, S learned sink tokens with
// their key, query and value vectors (in that order). The sinks are placed in
// front of the sequence, so the layout matches wsa_mask. Sink output rows are
// not part of the result, which keeps the output at [B x H x N x D]; sink
// queries therefore do not influence the output.
//
// Query rows are processed in tiles of 64. Per tile the kernel holds one
// score buffer of rows x (S + min(W + 1, N)) values, so transient memory per
// (batch, head) is O(N (W + S)) at most and O(W + S) per tile.
template <class Real>
WsaResult<Real> windowed_sink_attention_forward(const BasicTensor<Real>& q,
                                                const BasicTensor<Real>& k,
                                                const BasicTensor<Real>& v,
                                                const BasicTensor<Real>& sink_kqv,
                                                const WsaConfig& cfg,
                                                ScratchProbe* probe = nullptr);

template <class Real>
BasicTensor<Real> windowed_sink_attention(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                          const BasicTensor<Real>& v,
                                          const BasicTensor<Real>& sink_kqv, const WsaConfig& cfg,
                                          ScratchProbe* probe = nullptr) {
  return windowed_sink_attention_forward(q, k, v, sink_kqv, cfg, probe).out;
}

// Gradients of the windowed kernel; recomputes probabilities tile by tile from
// the saved row log-sum-exp, with the same memory bound as the forward pass.
// sink_kqv gradient is summed over the batch; the query slot is always zero.
template <class Real>
AttentionGrads<Real> windowed_sink_attention_backward(
    const BasicTensor<Real>& q, const BasicTensor<Real>& k, const BasicTensor<Real>& v,
    const BasicTensor<Real>& sink_kqv, const WsaConfig& cfg, const WsaResult<Real>& forward,
    const BasicTensor<Real>& grad_out, ScratchProbe* probe = nullptr);

// Builds the (S + N)-long q/k/v the oracle needs to reproduce the windowed
// kernel: sink rows first, broadcast over the batch.
template <class Real>
struct ExtendedQkv {
  BasicTensor<Real> q;
  BasicTensor<Real> k;
  BasicTensor<Real> v;
};

template <class Real>
ExtendedQkv<Real> extend_with_sinks(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                    const BasicTensor<Real>& v, const BasicTensor<Real>& sink_kqv,
                                    std::size_t sinks);

// Drops the first `rows` positions along the sequence axis of [B x H x N x D].
template <class Real>
BasicTensor<Real> drop_leading_rows(const BasicTensor<Real>& x, std::size_t rows);

}  // namespace wsa::attention
