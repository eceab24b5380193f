// SPDX-License-Identifier: Apache-2.0

#include "wsa/attention/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "wsa/core/error.hpp"
#include "wsa/core/parallel.hpp"

namespace wsa::attention {

namespace {

constexpr std::size_t kTileRows = 64;

template <class Real>
constexpr Real neg_inf() {
  return -std::numeric_limits<Real>::infinity();
}

template <class Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void check_qkv(const Shape& q, const Shape& k, const Shape& v) {
  if (q.size() != 4 || q != k || q != v) {
    throw DimensionError("attention expects matching [B x H x N x D] q/k/v, got q " +
                         shape_string(q) + ", k " + shape_string(k) + ", v " + shape_string(v));
  }
}

template <class Real>
void check_sinks(const BasicTensor<Real>& sink_kqv, const AttentionDims& dims, std::size_t sinks) {
  if (sinks == 0 && sink_kqv.size() == 0) return;
  const Shape expected{dims.heads, sinks, 3, dims.head_dim};
  if (sink_kqv.shape() != expected) {
    throw DimensionError("sink_kqv shape " + shape_string(sink_kqv.shape()) + " does not match " +
                         shape_string(expected));
  }
}

// Row range of the diagonal band for query i: [lo, hi].
struct BandRange {
  std::size_t lo;
  std::size_t hi;
};

BandRange band_range(std::size_t i, std::size_t half, std::size_t n) {
  return {i >= half ? i - half : 0, std::min(n - 1, i + half)};
}

// Fills one row of compacted scores: sink slots first, then the band columns
// [lo, hi] left-aligned; unused slots hold -inf. Returns the row maximum.
template <class Real>
Real band_scores(const Real* qi, const Real* k_head, const Real* sink_head, std::size_t sinks,
                 std::size_t d, BandRange range, Real scale, Real* row, std::size_t width) {
  Real row_max = neg_inf<Real>();
  for (std::size_t c = 0; c < sinks; ++c) {
    row[c] = dot(qi, sink_head + (c * 3 + 0) * d, d) * scale;
    row_max = std::max(row_max, row[c]);
  }
  std::size_t c = sinks;
  for (std::size_t j = range.lo; j <= range.hi; ++j, ++c) {
    row[c] = dot(qi, k_head + j * d, d) * scale;
    row_max = std::max(row_max, row[c]);
  }
  for (; c < width; ++c) row[c] = neg_inf<Real>();
  return row_max;
}

}  // namespace

void WsaConfig::validate() const {
  if (window % 2 != 0) {
    throw ConfigError("window must be even so the band is symmetric, got " + std::to_string(window));
  }
}

bool wsa_mask(std::size_t i, std::size_t j, const WsaConfig& cfg) {
  const std::size_t dist = i > j ? i - j : j - i;
  return i < cfg.sinks || j < cfg.sinks || dist <= cfg.window / 2;
}

AttentionDims AttentionDims::of(const Shape& shape) {
  if (shape.size() != 4) {
    throw DimensionError("expected [B x H x N x D], got " + shape_string(shape));
  }
  AttentionDims d{shape[0], shape[1], shape[2], shape[3]};
  if (d.batch == 0 || d.heads == 0 || d.seq == 0 || d.head_dim == 0) {
    throw DimensionError("attention dims must all be >= 1, got " + shape_string(shape));
  }
  return d;
}

void ScratchProbe::record(std::size_t elements) {
  ++count_;
  std::size_t prev = largest_.load();
  while (elements > prev && !largest_.compare_exchange_weak(prev, elements)) {
  }
}

template <class Real>
BasicTensor<Real> full_attention(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                 const BasicTensor<Real>& v, std::type_identity_t<BasicTensor<Real>>* mean_weights,
                                 ScratchProbe* probe) {
  check_qkv(q.shape(), k.shape(), v.shape());
  const auto dims = AttentionDims::of(q.shape());
  const std::size_t n = dims.seq, d = dims.head_dim;
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(d)));
  BasicTensor<Real> out(q.shape());
  if (mean_weights) *mean_weights = BasicTensor<Real>({n, n});
  const Real inv_count = static_cast<Real>(1.0 / static_cast<double>(dims.batch * dims.heads));

  auto one_head = [&](std::size_t bh) {
    const std::size_t off = bh * n * d;
    if (probe) probe->record(n * n);
    BasicTensor<Real> scores({n, n});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        scores.at(i, j) = dot(q.raw() + off + i * d, k.raw() + off + j * d, d) * scale;
      }
    }
    const auto probs = softmax_rows(scores);
    Real* o = out.raw() + off;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const Real p = probs.at(i, j);
        const Real* vj = v.raw() + off + j * d;
        for (std::size_t t = 0; t < d; ++t) o[i * d + t] += p * vj[t];
      }
    }
    if (mean_weights) {
      for (std::size_t e = 0; e < n * n; ++e) (*mean_weights)[e] += probs[e] * inv_count;
    }
  };

  const std::size_t heads_total = dims.batch * dims.heads;
  if (mean_weights) {
    for (std::size_t bh = 0; bh < heads_total; ++bh) one_head(bh);
  } else {
    parallel_for(heads_total, one_head);
  }
  return out;
}

template <class Real>
AttentionGrads<Real> full_attention_backward(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                             const BasicTensor<Real>& v,
                                             const BasicTensor<Real>& grad_out) {
  check_qkv(q.shape(), k.shape(), v.shape());
  check_qkv(q.shape(), grad_out.shape(), grad_out.shape());
  const auto dims = AttentionDims::of(q.shape());
  const std::size_t n = dims.seq, d = dims.head_dim;
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(d)));
  AttentionGrads<Real> g{BasicTensor<Real>(q.shape()), BasicTensor<Real>(q.shape()),
                         BasicTensor<Real>(q.shape()), {}};

  parallel_for(dims.batch * dims.heads, [&](std::size_t bh) {
    const std::size_t off = bh * n * d;
    BasicTensor<Real> scores({n, n});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        scores.at(i, j) = dot(q.raw() + off + i * d, k.raw() + off + j * d, d) * scale;
      }
    }
    const auto probs = softmax_rows(scores);
    const Real* go = grad_out.raw() + off;
    std::vector<Real> dp(n);
    for (std::size_t i = 0; i < n; ++i) {
      Real row_dot = 0;
      for (std::size_t j = 0; j < n; ++j) {
        dp[j] = dot(go + i * d, v.raw() + off + j * d, d);
        row_dot += dp[j] * probs.at(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) {
        const Real p = probs.at(i, j);
        const Real ds = p * (dp[j] - row_dot) * scale;
        for (std::size_t t = 0; t < d; ++t) {
          g.q[off + i * d + t] += ds * k[off + j * d + t];
          g.k[off + j * d + t] += ds * q[off + i * d + t];
          g.v[off + j * d + t] += p * go[i * d + t];
        }
      }
    }
  });
  return g;
}

template <class Real>
BasicTensor<Real> masked_attention_oracle(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                          const BasicTensor<Real>& v, const MaskFn& mask,
                                          std::type_identity_t<BasicTensor<Real>>* weights_out) {
  check_qkv(q.shape(), k.shape(), v.shape());
  const auto dims = AttentionDims::of(q.shape());
  const std::size_t n = dims.seq, d = dims.head_dim;
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(d)));
  BasicTensor<Real> out(q.shape());
  if (weights_out) *weights_out = BasicTensor<Real>({dims.batch, dims.heads, n, n});

  for (std::size_t bh = 0; bh < dims.batch * dims.heads; ++bh) {
    const std::size_t off = bh * n * d;
    BasicTensor<Real> scores({n, n});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        scores.at(i, j) = mask(i, j)
                              ? dot(q.raw() + off + i * d, k.raw() + off + j * d, d) * scale
                              : neg_inf<Real>();
      }
    }
    const auto probs = softmax_rows(scores);
    if (weights_out) {
      std::copy(probs.data().begin(), probs.data().end(), weights_out->raw() + bh * n * n);
    }
    const auto o = matmul(probs, BasicTensor<Real>({n, d}, std::vector<Real>(v.raw() + off,
                                                                             v.raw() + off + n * d)));
    std::copy(o.data().begin(), o.data().end(), out.raw() + off);
  }
  return out;
}

template <class Real>
WsaResult<Real> windowed_sink_attention_forward(const BasicTensor<Real>& q,
                                                const BasicTensor<Real>& k,
                                                const BasicTensor<Real>& v,
                                                const BasicTensor<Real>& sink_kqv,
                                                const WsaConfig& cfg, ScratchProbe* probe) {
  cfg.validate();
  check_qkv(q.shape(), k.shape(), v.shape());
  const auto dims = AttentionDims::of(q.shape());
  check_sinks(sink_kqv, dims, cfg.sinks);
  const std::size_t n = dims.seq, d = dims.head_dim, s = cfg.sinks;
  const std::size_t half = cfg.window / 2;
  const std::size_t band_slots = std::min(2 * half + 1, n);
  const std::size_t width = s + band_slots;
  const std::size_t tile = std::min(kTileRows, n);
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(d)));

  WsaResult<Real> result{BasicTensor<Real>(q.shape()),
                         BasicTensor<Real>({dims.batch, dims.heads, n})};

  parallel_for(dims.batch * dims.heads, [&](std::size_t bh) {
    const std::size_t head = bh % dims.heads;
    const std::size_t off = bh * n * d;
    const Real* q_head = q.raw() + off;
    const Real* k_head = k.raw() + off;
    const Real* v_head = v.raw() + off;
    const Real* sink_head = s ? sink_kqv.raw() + head * s * 3 * d : nullptr;
    Real* o_head = result.out.raw() + off;
    Real* lse = result.row_logsumexp.raw() + bh * n;

    if (probe) probe->record(tile * width);
    std::vector<Real> scores(tile * width);

    for (std::size_t start = 0; start < n; start += tile) {
      const std::size_t rows = std::min(tile, n - start);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = start + r;
        const auto range = band_range(i, half, n);
        Real* row = scores.data() + r * width;
        const Real row_max =
            band_scores(q_head + i * d, k_head, sink_head, s, d, range, scale, row, width);
        double sum = 0.0;
        for (std::size_t c = 0; c < width; ++c) {
          const Real e = row[c] == neg_inf<Real>() ? Real(0) : std::exp(row[c] - row_max);
          row[c] = e;
          sum += e;
        }
        const Real inv = static_cast<Real>(1.0 / sum);
        lse[i] = row_max + static_cast<Real>(std::log(sum));
        Real* oi = o_head + i * d;
        for (std::size_t c = 0; c < s; ++c) {
          const Real p = row[c] * inv;
          const Real* vs = sink_head + (c * 3 + 2) * d;
          for (std::size_t t = 0; t < d; ++t) oi[t] += p * vs[t];
        }
        std::size_t c = s;
        for (std::size_t j = range.lo; j <= range.hi; ++j, ++c) {
          const Real p = row[c] * inv;
          const Real* vj = v_head + j * d;
          for (std::size_t t = 0; t < d; ++t) oi[t] += p * vj[t];
        }
      }
    }
  });
  return result;
}

template <class Real>
AttentionGrads<Real> windowed_sink_attention_backward(
    const BasicTensor<Real>& q, const BasicTensor<Real>& k, const BasicTensor<Real>& v,
    const BasicTensor<Real>& sink_kqv, const WsaConfig& cfg, const WsaResult<Real>& forward,
    const BasicTensor<Real>& grad_out, ScratchProbe* probe) {
  cfg.validate();
  check_qkv(q.shape(), k.shape(), v.shape());
  check_qkv(q.shape(), grad_out.shape(), forward.out.shape());
  const auto dims = AttentionDims::of(q.shape());
  check_sinks(sink_kqv, dims, cfg.sinks);
  const std::size_t n = dims.seq, d = dims.head_dim, s = cfg.sinks;
  const std::size_t half = cfg.window / 2;
  const std::size_t band_slots = std::min(2 * half + 1, n);
  const std::size_t width = s + band_slots;
  const std::size_t tile = std::min(kTileRows, n);
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(d)));

  AttentionGrads<Real> g{BasicTensor<Real>(q.shape()), BasicTensor<Real>(q.shape()),
                         BasicTensor<Real>(q.shape()),
                         s ? BasicTensor<Real>(sink_kqv.shape()) : BasicTensor<Real>()};
  // Per-(batch, head) sink gradients, reduced in fixed order afterwards.
  const std::size_t heads_total = dims.batch * dims.heads;
  std::vector<std::vector<Real>> sink_partial(heads_total);

  parallel_for(heads_total, [&](std::size_t bh) {
    const std::size_t head = bh % dims.heads;
    const std::size_t off = bh * n * d;
    const Real* q_head = q.raw() + off;
    const Real* k_head = k.raw() + off;
    const Real* v_head = v.raw() + off;
    const Real* go_head = grad_out.raw() + off;
    const Real* o_head = forward.out.raw() + off;
    const Real* lse = forward.row_logsumexp.raw() + bh * n;
    const Real* sink_head = s ? sink_kqv.raw() + head * s * 3 * d : nullptr;
    Real* gq = g.q.raw() + off;
    Real* gk = g.k.raw() + off;
    Real* gv = g.v.raw() + off;

    if (probe) {
      probe->record(tile * width);
      probe->record(tile * width);
      if (s) probe->record(s * 3 * d);
    }
    std::vector<Real> probs(tile * width);
    std::vector<Real> dscore(tile * width);
    auto& sink_grad = sink_partial[bh];
    sink_grad.assign(s * 3 * d, Real(0));

    for (std::size_t start = 0; start < n; start += tile) {
      const std::size_t rows = std::min(tile, n - start);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = start + r;
        const auto range = band_range(i, half, n);
        Real* p = probs.data() + r * width;
        Real* ds = dscore.data() + r * width;
        band_scores(q_head + i * d, k_head, sink_head, s, d, range, scale, p, width);
        for (std::size_t c = 0; c < width; ++c) {
          p[c] = p[c] == neg_inf<Real>() ? Real(0) : std::exp(p[c] - lse[i]);
        }
        const Real* goi = go_head + i * d;
        const Real row_dot = dot(goi, o_head + i * d, d);
        for (std::size_t c = 0; c < s; ++c) {
          ds[c] = p[c] * (dot(goi, sink_head + (c * 3 + 2) * d, d) - row_dot) * scale;
        }
        std::size_t c = s;
        for (std::size_t j = range.lo; j <= range.hi; ++j, ++c) {
          ds[c] = p[c] * (dot(goi, v_head + j * d, d) - row_dot) * scale;
        }
        for (; c < width; ++c) ds[c] = 0;

        Real* gqi = gq + i * d;
        const Real* qi = q_head + i * d;
        for (std::size_t c2 = 0; c2 < s; ++c2) {
          const Real* ks = sink_head + (c2 * 3 + 0) * d;
          Real* gks = sink_grad.data() + (c2 * 3 + 0) * d;
          Real* gvs = sink_grad.data() + (c2 * 3 + 2) * d;
          for (std::size_t t = 0; t < d; ++t) {
            gqi[t] += ds[c2] * ks[t];
            gks[t] += ds[c2] * qi[t];
            gvs[t] += p[c2] * goi[t];
          }
        }
        c = s;
        for (std::size_t j = range.lo; j <= range.hi; ++j, ++c) {
          const Real* kj = k_head + j * d;
          Real* gkj = gk + j * d;
          Real* gvj = gv + j * d;
          for (std::size_t t = 0; t < d; ++t) {
            gqi[t] += ds[c] * kj[t];
            gkj[t] += ds[c] * qi[t];
            gvj[t] += p[c] * goi[t];
          }
        }
      }
    }
  });

  if (s) {
    for (std::size_t bh = 0; bh < heads_total; ++bh) {
      Real* dst = g.sink_kqv.raw() + (bh % dims.heads) * s * 3 * d;
      for (std::size_t e = 0; e < s * 3 * d; ++e) dst[e] += sink_partial[bh][e];
    }
  }
  return g;
}

template <class Real>
ExtendedQkv<Real> extend_with_sinks(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                    const BasicTensor<Real>& v, const BasicTensor<Real>& sink_kqv,
                                    std::size_t sinks) {
  check_qkv(q.shape(), k.shape(), v.shape());
  const auto dims = AttentionDims::of(q.shape());
  check_sinks(sink_kqv, dims, sinks);
  const std::size_t n = dims.seq, d = dims.head_dim, ext = n + sinks;
  const Shape shape{dims.batch, dims.heads, ext, d};
  ExtendedQkv<Real> out{BasicTensor<Real>(shape), BasicTensor<Real>(shape), BasicTensor<Real>(shape)};
  // Slot order inside sink_kqv is (key, query, value).
  const std::pair<const BasicTensor<Real>*, BasicTensor<Real>*> parts[] = {
      {&k, &out.k}, {&q, &out.q}, {&v, &out.v}};
  for (std::size_t slot = 0; slot < 3; ++slot) {
    const auto& [src, dst] = parts[slot];
    for (std::size_t b = 0; b < dims.batch; ++b) {
      for (std::size_t h = 0; h < dims.heads; ++h) {
        Real* base = dst->raw() + ((b * dims.heads + h) * ext) * d;
        for (std::size_t c = 0; c < sinks; ++c) {
          const Real* sv = sink_kqv.raw() + ((h * sinks + c) * 3 + slot) * d;
          std::copy(sv, sv + d, base + c * d);
        }
        const Real* rows = src->raw() + ((b * dims.heads + h) * n) * d;
        std::copy(rows, rows + n * d, base + sinks * d);
      }
    }
  }
  return out;
}

template <class Real>
BasicTensor<Real> drop_leading_rows(const BasicTensor<Real>& x, std::size_t rows) {
  const auto dims = AttentionDims::of(x.shape());
  if (rows > dims.seq) throw DimensionError("cannot drop more rows than the sequence holds");
  const std::size_t n = dims.seq - rows, d = dims.head_dim;
  BasicTensor<Real> out({dims.batch, dims.heads, n, d});
  for (std::size_t bh = 0; bh < dims.batch * dims.heads; ++bh) {
    const Real* src = x.raw() + (bh * dims.seq + rows) * d;
    std::copy(src, src + n * d, out.raw() + bh * n * d);
  }
  return out;
}

#define WSA_INSTANTIATE(Real)                                                                     \
  template BasicTensor<Real> full_attention(const BasicTensor<Real>&, const BasicTensor<Real>&,   \
                                            const BasicTensor<Real>&, BasicTensor<Real>*,          \
                                            ScratchProbe*);                                        \
  template AttentionGrads<Real> full_attention_backward(                                          \
      const BasicTensor<Real>&, const BasicTensor<Real>&, const BasicTensor<Real>&,               \
      const BasicTensor<Real>&);                                                                  \
  template BasicTensor<Real> masked_attention_oracle(const BasicTensor<Real>&,                    \
                                                     const BasicTensor<Real>&,                    \
                                                     const BasicTensor<Real>&, const MaskFn&,     \
                                                     BasicTensor<Real>*);                         \
  template WsaResult<Real> windowed_sink_attention_forward(                                       \
      const BasicTensor<Real>&, const BasicTensor<Real>&, const BasicTensor<Real>&,               \
      const BasicTensor<Real>&, const WsaConfig&, ScratchProbe*);                                 \
  template AttentionGrads<Real> windowed_sink_attention_backward(                                 \
      const BasicTensor<Real>&, const BasicTensor<Real>&, const BasicTensor<Real>&,               \
      const BasicTensor<Real>&, const WsaConfig&, const WsaResult<Real>&,                         \
      const BasicTensor<Real>&, ScratchProbe*);                                                   \
  template ExtendedQkv<Real> extend_with_sinks(const BasicTensor<Real>&, const BasicTensor<Real>&, \
                                               const BasicTensor<Real>&, const BasicTensor<Real>&, \
                                               std::size_t);                                       \
  template BasicTensor<Real> drop_leading_rows(const BasicTensor<Real>&, std::size_t);

WSA_INSTANTIATE(float)
WSA_INSTANTIATE(double)

#undef WSA_INSTANTIATE

}  // namespace wsa::attention
