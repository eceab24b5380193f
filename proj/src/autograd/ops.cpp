// SPDX-License-Identifier: Apache-2.0

#include "wsa/autograd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "wsa/attention/rope.hpp"

namespace wsa::autograd {
namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a) + " and " +
                         shape_string(b) + " differ");
  }
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(s));
  }
}

template <class Real>
BasicTensor<Real> scalar_tensor(double v) {
  return BasicTensor<Real>({1}, {static_cast<Real>(v)});
}

// [2 x F x T] real tensor <-> [F x T] complex tensor.
template <class Real>
BasicTensor<Real> pack(const BasicComplexTensor<Real>& c) {
  const std::size_t n = c.size();
  BasicTensor<Real> out({2, c.dim(0), c.dim(1)});
  std::copy(c.re().begin(), c.re().end(), out.raw());
  std::copy(c.im().begin(), c.im().end(), out.raw() + n);
  return out;
}

template <class Real>
BasicComplexTensor<Real> unpack(const BasicTensor<Real>& t) {
  require_rank(t.shape(), 3, "spectrogram");
  if (t.dim(0) != 2) throw DimensionError("spectrogram: leading axis must be 2, got " + shape_string(t.shape()));
  const std::size_t n = t.dim(1) * t.dim(2);
  return BasicComplexTensor<Real>({t.dim(1), t.dim(2)}, std::vector<Real>(t.raw(), t.raw() + n),
                                  std::vector<Real>(t.raw() + n, t.raw() + 2 * n));
}

}  // namespace

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  BasicTensor<Real> out = a.value();
  auto ov = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  const double exact = out.size() == 1 ? a.item() + b.item() : nan_value;
  Node<Real>* pa = a.node();
  Node<Real>* pb = b.node();
  return make_op<Real>(std::move(out), {a, b},
                       [pa, pb](const BasicTensor<Real>& g) {
                         pa->accumulate(g);
                         pb->accumulate(g);
                       },
                       exact);
}

template <class Real>
Var<Real> sub_const(const Var<Real>& a, const BasicTensor<Real>& c) {
  require_same_shape(a.shape(), c.shape(), "sub_const");
  BasicTensor<Real> out = a.value();
  auto ov = out.data();
  auto cv = c.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= cv[i];
  Node<Real>* pa = a.node();
  return make_op<Real>(std::move(out), {a}, [pa](const BasicTensor<Real>& g) { pa->accumulate(g); });
}

template <class Real>
Var<Real> scale(const Var<Real>& a, double s) {
  BasicTensor<Real> out = a.value();
  for (auto& x : out.data()) x = static_cast<Real>(x * s);
  const double exact = out.size() == 1 ? a.item() * s : nan_value;
  Node<Real>* pa = a.node();
  return make_op<Real>(std::move(out), {a},
                       [pa, s](const BasicTensor<Real>& g) {
                         BasicTensor<Real> ga = g;
                         for (auto& x : ga.data()) x = static_cast<Real>(x * s);
                         pa->accumulate(ga);
                       },
                       exact);
}

template <class Real>
Var<Real> linear(const Var<Real>& x, const Var<Real>& w, const Var<Real>& b) {
  require_rank(w.shape(), 2, "linear weight");
  const std::size_t in = w.shape()[0], out_dim = w.shape()[1];
  if (x.shape().empty() || x.shape().back() != in || b.shape() != Shape{out_dim}) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + ", weight " +
                         shape_string(w.shape()) + ", bias " + shape_string(b.shape()));
  }
  const std::size_t rows = x.value().size() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  BasicTensor<Real> out(out_shape);
  const Real* xv = x.value().raw();
  const Real* wv = w.value().raw();
  const Real* bv = b.value().raw();
  std::vector<double> acc(out_dim);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out_dim; ++j) acc[j] = bv[j];
    for (std::size_t p = 0; p < in; ++p) {
      const double a = xv[r * in + p];
      const Real* wrow = wv + p * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) acc[j] += a * wrow[j];
    }
    for (std::size_t j = 0; j < out_dim; ++j) out[r * out_dim + j] = static_cast<Real>(acc[j]);
  }

  Node<Real>* px = x.node();
  Node<Real>* pw = w.node();
  Node<Real>* pb = b.node();
  return make_op<Real>(std::move(out), {x, w, b}, [px, pw, pb, rows, in, out_dim](const BasicTensor<Real>& g) {
    const Real* gv = g.raw();
    const Real* xv = px->value.raw();
    const Real* wv = pw->value.raw();
    if (px->requires_grad) {
      BasicTensor<Real> gx(px->value.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t p = 0; p < in; ++p) {
          double s = 0;
          const Real* wrow = wv + p * out_dim;
          const Real* grow = gv + r * out_dim;
          for (std::size_t j = 0; j < out_dim; ++j) s += double(grow[j]) * wrow[j];
          gx[r * in + p] = static_cast<Real>(s);
        }
      }
      px->accumulate(gx);
    }
    if (pw->requires_grad) {
      std::vector<double> acc(in * out_dim, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t p = 0; p < in; ++p) {
          const double a = xv[r * in + p];
          if (a == 0) continue;
          double* arow = acc.data() + p * out_dim;
          const Real* grow = gv + r * out_dim;
          for (std::size_t j = 0; j < out_dim; ++j) arow[j] += a * grow[j];
        }
      }
      BasicTensor<Real> gw(pw->value.shape(), std::vector<Real>(acc.begin(), acc.end()));
      pw->accumulate(gw);
    }
    if (pb->requires_grad) {
      std::vector<double> acc(out_dim, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < out_dim; ++j) acc[j] += gv[r * out_dim + j];
      }
      pb->accumulate(BasicTensor<Real>({out_dim}, std::vector<Real>(acc.begin(), acc.end())));
    }
  });
}

template <class Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gain, const Var<Real>& bias, double eps) {
  if (x.shape().empty()) throw DimensionError("layer_norm on a scalar");
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: input " + shape_string(x.shape()) + ", gain " +
                         shape_string(gain.shape()) + ", bias " + shape_string(bias.shape()));
  }
  const std::size_t rows = x.value().size() / d;
  auto xhat = std::make_shared<std::vector<double>>(x.value().size());
  auto inv_sigma = std::make_shared<std::vector<double>>(rows);
  BasicTensor<Real> out(x.shape());
  const Real* xv = x.value().raw();
  const Real* gv = gain.value().raw();
  const Real* bv = bias.value().raw();
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = xv + r * d;
    double mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= double(d);
    double var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= double(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = static_cast<Real>(h * gv[j] + bv[j]);
    }
  }

  Node<Real>* px = x.node();
  Node<Real>* pg = gain.node();
  Node<Real>* pb = bias.node();
  return make_op<Real>(std::move(out), {x, gain, bias},
                       [px, pg, pb, xhat, inv_sigma, rows, d](const BasicTensor<Real>& g) {
    const Real* gv = g.raw();
    const Real* gain_v = pg->value.raw();
    if (px->requires_grad) {
      BasicTensor<Real> gx(px->value.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_dh = 0, mean_dh_h = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const double dh = double(gv[r * d + j]) * gain_v[j];
          mean_dh += dh;
          mean_dh_h += dh * (*xhat)[r * d + j];
        }
        mean_dh /= double(d);
        mean_dh_h /= double(d);
        for (std::size_t j = 0; j < d; ++j) {
          const double dh = double(gv[r * d + j]) * gain_v[j];
          gx[r * d + j] = static_cast<Real>((*inv_sigma)[r] *
                                            (dh - mean_dh - (*xhat)[r * d + j] * mean_dh_h));
        }
      }
      px->accumulate(gx);
    }
    if (pg->requires_grad || pb->requires_grad) {
      std::vector<double> dg(d, 0.0), db(d, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
          dg[j] += gv[r * d + j] * (*xhat)[r * d + j];
          db[j] += gv[r * d + j];
        }
      }
      pg->accumulate(BasicTensor<Real>({d}, std::vector<Real>(dg.begin(), dg.end())));
      pb->accumulate(BasicTensor<Real>({d}, std::vector<Real>(db.begin(), db.end())));
    }
  });
}

template <class Real>
Var<Real> gelu(const Var<Real>& x) {
  BasicTensor<Real> out(x.shape());
  const auto xv = x.value().data();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = static_cast<Real>(0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)));
  }
  Node<Real>* px = x.node();
  return make_op<Real>(std::move(out), {x}, [px](const BasicTensor<Real>& g) {
    BasicTensor<Real> gx(px->value.shape());
    const auto xv = px->value.data();
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] = static_cast<Real>(g[i] * (cdf + v * pdf));
    }
    px->accumulate(gx);
  });
}

namespace {

// out[b, h, n, d] = x[b, n, h * D + d], or the reverse permutation.
template <class Real>
BasicTensor<Real> permute_heads(const BasicTensor<Real>& x, std::size_t batch, std::size_t seq,
                                std::size_t heads, std::size_t head_dim, bool split) {
  BasicTensor<Real> out(split ? Shape{batch, heads, seq, head_dim} : Shape{batch, seq, heads * head_dim});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < seq; ++n) {
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t merged = ((b * seq + n) * heads + h) * head_dim;
        const std::size_t splitted = ((b * heads + h) * seq + n) * head_dim;
        for (std::size_t d = 0; d < head_dim; ++d) {
          if (split) {
            out[splitted + d] = x[merged + d];
          } else {
            out[merged + d] = x[splitted + d];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

template <class Real>
Var<Real> split_heads(const Var<Real>& x, std::size_t heads) {
  require_rank(x.shape(), 3, "split_heads");
  const std::size_t batch = x.shape()[0], seq = x.shape()[1], width = x.shape()[2];
  if (heads == 0 || width % heads != 0) {
    throw DimensionError("split_heads: width " + std::to_string(width) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  const std::size_t hd = width / heads;
  Node<Real>* px = x.node();
  return make_op<Real>(permute_heads(x.value(), batch, seq, heads, hd, true), {x},
                       [px, batch, seq, heads, hd](const BasicTensor<Real>& g) {
                         px->accumulate(permute_heads(g, batch, seq, heads, hd, false));
                       });
}

template <class Real>
Var<Real> merge_heads(const Var<Real>& x) {
  require_rank(x.shape(), 4, "merge_heads");
  const std::size_t batch = x.shape()[0], heads = x.shape()[1], seq = x.shape()[2], hd = x.shape()[3];
  Node<Real>* px = x.node();
  return make_op<Real>(permute_heads(x.value(), batch, seq, heads, hd, false), {x},
                       [px, batch, seq, heads, hd](const BasicTensor<Real>& g) {
                         px->accumulate(permute_heads(g, batch, seq, heads, hd, true));
                       });
}

namespace {

template <class Real>
BasicTensor<Real> swap01(const BasicTensor<Real>& x) {
  const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2);
  BasicTensor<Real> out({b, a, c});
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      std::copy_n(x.raw() + (i * b + j) * c, c, out.raw() + (j * a + i) * c);
    }
  }
  return out;
}

}  // namespace

template <class Real>
Var<Real> swap_leading(const Var<Real>& x) {
  require_rank(x.shape(), 3, "swap_leading");
  Node<Real>* px = x.node();
  return make_op<Real>(swap01(x.value()), {x},
                       [px](const BasicTensor<Real>& g) { px->accumulate(swap01(g)); });
}

template <class Real>
Var<Real> rope(const Var<Real>& x, double base) {
  Node<Real>* px = x.node();
  return make_op<Real>(attention::rope_rotate(x.value(), base, false), {x},
                       [px, base](const BasicTensor<Real>& g) {
                         px->accumulate(attention::rope_rotate(g, base, true));
                       });
}

template <class Real>
Var<Real> full_attention(const Var<Real>& q, const Var<Real>& k, const Var<Real>& v,
                         BasicTensor<Real>* capture) {
  Node<Real>* pq = q.node();
  Node<Real>* pk = k.node();
  Node<Real>* pv = v.node();
  return make_op<Real>(attention::full_attention(q.value(), k.value(), v.value(), capture), {q, k, v},
                       [pq, pk, pv](const BasicTensor<Real>& g) {
                         auto grads = attention::full_attention_backward(pq->value, pk->value,
                                                                         pv->value, g);
                         pq->accumulate(grads.q);
                         pk->accumulate(grads.k);
                         pv->accumulate(grads.v);
                       });
}

template <class Real>
Var<Real> windowed_sink_attention(const Var<Real>& q, const Var<Real>& k, const Var<Real>& v,
                                  const Var<Real>& sink_kqv, const attention::WsaConfig& cfg) {
  auto result = std::make_shared<attention::WsaResult<Real>>(attention::windowed_sink_attention_forward(
      q.value(), k.value(), v.value(), sink_kqv.value(), cfg));
  BasicTensor<Real> out = result->out;
  Node<Real>* pq = q.node();
  Node<Real>* pk = k.node();
  Node<Real>* pv = v.node();
  Node<Real>* ps = sink_kqv.node();
  return make_op<Real>(std::move(out), {q, k, v, sink_kqv},
                       [pq, pk, pv, ps, cfg, result](const BasicTensor<Real>& g) {
                         auto grads = attention::windowed_sink_attention_backward(
                             pq->value, pk->value, pv->value, ps->value, cfg, *result, g);
                         pq->accumulate(grads.q);
                         pk->accumulate(grads.k);
                         pv->accumulate(grads.v);
                         ps->accumulate(grads.sink_kqv);
                       });
}

template <class Real>
Var<Real> select(const Var<Real>& x, std::size_t index) {
  if (x.shape().empty() || index >= x.shape()[0]) {
    throw DimensionError("select: index " + std::to_string(index) + " out of range for " +
                         shape_string(x.shape()));
  }
  const Shape inner(x.shape().begin() + 1, x.shape().end());
  const std::size_t n = shape_numel(inner);
  const Real* src = x.value().raw() + index * n;
  BasicTensor<Real> out(inner, std::vector<Real>(src, src + n));
  Node<Real>* px = x.node();
  return make_op<Real>(std::move(out), {x}, [px, index, n](const BasicTensor<Real>& g) {
    BasicTensor<Real> gx(px->value.shape());
    std::copy_n(g.raw(), n, gx.raw() + index * n);
    px->accumulate(gx);
  });
}

template <class Real>
Var<Real> stack(const std::vector<Var<Real>>& xs) {
  if (xs.empty()) throw DimensionError("stack of no tensors");
  const Shape inner = xs.front().shape();
  const std::size_t n = shape_numel(inner);
  Shape shape{xs.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  BasicTensor<Real> out(shape);
  std::vector<Node<Real>*> nodes;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require_same_shape(xs[i].shape(), inner, "stack");
    std::copy_n(xs[i].value().raw(), n, out.raw() + i * n);
    nodes.push_back(xs[i].node());
  }
  return make_op<Real>(std::move(out), xs, [nodes, inner, n](const BasicTensor<Real>& g) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i]->requires_grad) continue;
      nodes[i]->accumulate(BasicTensor<Real>(inner, std::vector<Real>(g.raw() + i * n, g.raw() + (i + 1) * n)));
    }
  });
}

template <class Real>
Var<Real> band_overlap_add(const std::vector<Var<Real>>& heads, const dsp::BandSpec& bands) {
  if (heads.size() != bands.num_bands() || heads.empty()) {
    throw DimensionError("band_overlap_add: " + std::to_string(heads.size()) + " heads for " +
                         std::to_string(bands.num_bands()) + " bands");
  }
  const std::size_t frames = heads.front().shape().empty() ? 0 : heads.front().shape()[0];
  const std::size_t bins = bands.num_bins;
  for (std::size_t b = 0; b < heads.size(); ++b) {
    const Shape expect{frames, 2 * bands.bands[b].width()};
    if (heads[b].shape() != expect) {
      throw DimensionError("band_overlap_add: band " + std::to_string(b) + " head is " +
                           shape_string(heads[b].shape()) + ", expected " + shape_string(expect));
    }
  }
  BasicTensor<Real> out({2, bins, frames});
  Real* re = out.raw();
  Real* im = out.raw() + bins * frames;
  for (std::size_t b = 0; b < heads.size(); ++b) {
    const auto& band = bands.bands[b];
    const std::size_t w = band.width();
    const Real* h = heads[b].value().raw();
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = band.lo; f <= band.hi; ++f) {
        re[f * frames + t] += h[t * 2 * w + 2 * (f - band.lo)];
        im[f * frames + t] += h[t * 2 * w + 2 * (f - band.lo) + 1];
      }
    }
  }
  std::vector<Node<Real>*> nodes;
  for (const auto& h : heads) nodes.push_back(h.node());
  return make_op<Real>(std::move(out), heads, [nodes, bands, frames](const BasicTensor<Real>& g) {
    const std::size_t bins = bands.num_bins;
    const Real* re = g.raw();
    const Real* im = g.raw() + bins * frames;
    for (std::size_t b = 0; b < nodes.size(); ++b) {
      if (!nodes[b]->requires_grad) continue;
      const auto& band = bands.bands[b];
      const std::size_t w = band.width();
      BasicTensor<Real> gh(nodes[b]->value.shape());
      for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t f = band.lo; f <= band.hi; ++f) {
          gh[t * 2 * w + 2 * (f - band.lo)] = re[f * frames + t];
          gh[t * 2 * w + 2 * (f - band.lo) + 1] = im[f * frames + t];
        }
      }
      nodes[b]->accumulate(gh);
    }
  });
}

template <class Real>
Var<Real> complex_mul_const(const Var<Real>& mask, const BasicComplexTensor<Real>& spec) {
  const Shape expect{2, spec.dim(0), spec.dim(1)};
  require_same_shape(mask.shape(), expect, "complex_mul_const");
  const std::size_t n = spec.size();
  BasicTensor<Real> out(expect);
  const Real* a = mask.value().raw();
  const Real* b = a + n;
  const auto c = spec.re();
  const auto d = spec.im();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a[i] * c[i] - b[i] * d[i];
    out[n + i] = a[i] * d[i] + b[i] * c[i];
  }
  Node<Real>* pm = mask.node();
  return make_op<Real>(std::move(out), {mask}, [pm, spec, n](const BasicTensor<Real>& g) {
    BasicTensor<Real> gm(pm->value.shape());
    const auto c = spec.re();
    const auto d = spec.im();
    for (std::size_t i = 0; i < n; ++i) {
      gm[i] = g[i] * c[i] + g[n + i] * d[i];
      gm[n + i] = -g[i] * d[i] + g[n + i] * c[i];
    }
    pm->accumulate(gm);
  });
}

template <class Real>
Var<Real> stft(const Var<Real>& signal, const dsp::StftConfig& cfg) {
  require_rank(signal.shape(), 1, "stft");
  const std::size_t len = signal.shape()[0];
  Node<Real>* ps = signal.node();
  return make_op<Real>(pack(dsp::stft_channel<Real>(signal.value().data(), cfg)), {signal},
                       [ps, cfg, len](const BasicTensor<Real>& g) {
                         auto gs = dsp::stft_channel_adjoint<Real>(unpack(g), cfg, len);
                         ps->accumulate(BasicTensor<Real>({len}, std::move(gs)));
                       });
}

template <class Real>
Var<Real> istft(const Var<Real>& spec, const dsp::StftConfig& cfg, std::size_t out_len) {
  auto samples = dsp::istft_channel<Real>(unpack(spec.value()), cfg, out_len);
  const std::size_t frames = spec.shape()[2];
  Node<Real>* ps = spec.node();
  return make_op<Real>(BasicTensor<Real>({out_len}, std::move(samples)), {spec},
                       [ps, cfg, frames](const BasicTensor<Real>& g) {
                         ps->accumulate(pack(dsp::istft_channel_adjoint<Real>(g.data(), cfg, frames)));
                       });
}

template <class Real>
Var<Real> abs_sum(const Var<Real>& a) {
  double s = 0;
  for (Real x : a.value().data()) s += std::abs(double(x));
  Node<Real>* pa = a.node();
  return make_op<Real>(scalar_tensor<Real>(s), {a},
                       [pa](const BasicTensor<Real>& g) {
                         BasicTensor<Real> ga(pa->value.shape());
                         const auto av = pa->value.data();
                         for (std::size_t i = 0; i < av.size(); ++i) {
                           ga[i] = av[i] > 0 ? g[0] : (av[i] < 0 ? -g[0] : Real(0));
                         }
                         pa->accumulate(ga);
                       },
                       s);
}

template <class Real>
Var<Real> square_sum(const Var<Real>& a) {
  double s = 0;
  for (Real x : a.value().data()) s += double(x) * x;
  Node<Real>* pa = a.node();
  return make_op<Real>(scalar_tensor<Real>(s), {a},
                       [pa](const BasicTensor<Real>& g) {
                         BasicTensor<Real> ga(pa->value.shape());
                         const auto av = pa->value.data();
                         for (std::size_t i = 0; i < av.size(); ++i) ga[i] = 2 * av[i] * g[0];
                         pa->accumulate(ga);
                       },
                       s);
}

template <class Real>
Var<Real> cosine_distance(const Var<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "cosine_distance");
  const auto av = a.value().data();
  const auto bv = b.data();
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += double(av[i]) * bv[i];
    na += double(av[i]) * av[i];
    nb += double(bv[i]) * bv[i];
  }
  if (na == 0 && nb == 0) throw NumericError("cosine similarity of two zero tensors is undefined");
  double cos = 0;
  if (na > 0 && nb > 0) cos = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  const double value = 1.0 - cos;
  Node<Real>* pa = a.node();
  return make_op<Real>(scalar_tensor<Real>(value), {a},
                       [pa, b, dot, na, nb](const BasicTensor<Real>& g) {
                         BasicTensor<Real> ga(pa->value.shape());
                         if (na > 0 && nb > 0) {
                           const double norm = std::sqrt(na * nb);
                           const double cos = dot / norm;
                           const auto av = pa->value.data();
                           const auto bv = b.data();
                           for (std::size_t i = 0; i < av.size(); ++i) {
                             ga[i] = static_cast<Real>(-g[0] * (bv[i] / norm - cos * av[i] / na));
                           }
                         }
                         pa->accumulate(ga);
                       },
                       value);
}

#define WSA_INSTANTIATE(Real)                                                                          \
  template Var<Real> add(const Var<Real>&, const Var<Real>&);                                          \
  template Var<Real> sub_const(const Var<Real>&, const BasicTensor<Real>&);                            \
  template Var<Real> scale(const Var<Real>&, double);                                                  \
  template Var<Real> linear(const Var<Real>&, const Var<Real>&, const Var<Real>&);                     \
  template Var<Real> layer_norm(const Var<Real>&, const Var<Real>&, const Var<Real>&, double);         \
  template Var<Real> gelu(const Var<Real>&);                                                           \
  template Var<Real> split_heads(const Var<Real>&, std::size_t);                                       \
  template Var<Real> merge_heads(const Var<Real>&);                                                    \
  template Var<Real> swap_leading(const Var<Real>&);                                                   \
  template Var<Real> rope(const Var<Real>&, double);                                                   \
  template Var<Real> full_attention(const Var<Real>&, const Var<Real>&, const Var<Real>&,              \
                                    BasicTensor<Real>*);                                               \
  template Var<Real> windowed_sink_attention(const Var<Real>&, const Var<Real>&, const Var<Real>&,     \
                                             const Var<Real>&, const attention::WsaConfig&);           \
  template Var<Real> select(const Var<Real>&, std::size_t);                                            \
  template Var<Real> stack(const std::vector<Var<Real>>&);                                             \
  template Var<Real> band_overlap_add(const std::vector<Var<Real>>&, const dsp::BandSpec&);            \
  template Var<Real> complex_mul_const(const Var<Real>&, const BasicComplexTensor<Real>&);             \
  template Var<Real> stft(const Var<Real>&, const dsp::StftConfig&);                                   \
  template Var<Real> istft(const Var<Real>&, const dsp::StftConfig&, std::size_t);                     \
  template Var<Real> abs_sum(const Var<Real>&);                                                        \
  template Var<Real> square_sum(const Var<Real>&);                                                     \
  template Var<Real> cosine_distance(const Var<Real>&, const BasicTensor<Real>&);

WSA_INSTANTIATE(float)
WSA_INSTANTIATE(double)

#undef WSA_INSTANTIATE

}  // namespace wsa::autograd
