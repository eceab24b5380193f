// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "wsa/attention/attention.hpp"
#include "wsa/attention/flops.hpp"
#include "wsa/attention/rope.hpp"
#include "wsa/core/rng.hpp"

namespace wsa::attention {
namespace {

template <class Real = float>
BasicTensor<Real> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  BasicTensor<Real> t(std::move(shape));
  for (auto& x : t.data()) x = static_cast<Real>(rng.uniform(-scale, scale));
  return t;
}

// Straight-from-the-definition attention in double: scores, masked
// exponentials, normalization, weighted sum. No shared code with the kernels.
Tensor brute_force_attention(const Tensor& q, const Tensor& k, const Tensor& v, const MaskFn& mask) {
  const auto d = AttentionDims::of(q.shape());
  Tensor out(q.shape());
  for (std::size_t bh = 0; bh < d.batch * d.heads; ++bh) {
    const std::size_t off = bh * d.seq * d.head_dim;
    for (std::size_t i = 0; i < d.seq; ++i) {
      std::vector<double> s(d.seq, 0.0);
      double mx = -1e300;
      for (std::size_t j = 0; j < d.seq; ++j) {
        if (!mask(i, j)) continue;
        for (std::size_t t = 0; t < d.head_dim; ++t)
          s[j] += double(q[off + i * d.head_dim + t]) * k[off + j * d.head_dim + t];
        s[j] /= std::sqrt(double(d.head_dim));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (std::size_t j = 0; j < d.seq; ++j) z += mask(i, j) ? std::exp(s[j] - mx) : 0.0;
      for (std::size_t t = 0; t < d.head_dim; ++t) {
        double acc = 0;
        for (std::size_t j = 0; j < d.seq; ++j)
          if (mask(i, j)) acc += std::exp(s[j] - mx) / z * v[off + j * d.head_dim + t];
        out[off + i * d.head_dim + t] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor wsa_via_oracle(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& sinks,
                      const WsaConfig& cfg) {
  const auto ext = extend_with_sinks(q, k, v, sinks, cfg.sinks);
  const auto full = masked_attention_oracle(ext.q, ext.k, ext.v,
                                            [&](std::size_t i, std::size_t j) { return wsa_mask(i, j, cfg); });
  return drop_leading_rows(full, cfg.sinks);
}

const auto kAllTrue = [](std::size_t, std::size_t) { return true; };

TEST(WsaMask, KnownPairs) {
  const WsaConfig cfg{10, 8};
  EXPECT_TRUE(wsa_mask(3, 700, cfg));
  EXPECT_TRUE(wsa_mask(700, 3, cfg));
  EXPECT_TRUE(wsa_mask(100, 104, cfg));
  EXPECT_TRUE(wsa_mask(100, 105, cfg));
  EXPECT_FALSE(wsa_mask(100, 106, cfg));
  EXPECT_FALSE(wsa_mask(106, 100, cfg));
}

TEST(WsaConfig, OddWindowRejected) {
  EXPECT_THROW((WsaConfig{3, 0}.validate()), ConfigError);
  Rng rng(1);
  const auto x = random_tensor(rng, {1, 1, 4, 2});
  EXPECT_THROW(windowed_sink_attention(x, x, x, Tensor(), WsaConfig{5, 0}), ConfigError);
}

TEST(FullAttention, SingleTokenReturnsValue) {
  Rng rng(2);
  const auto q = random_tensor(rng, {2, 3, 1, 4});
  const auto k = random_tensor(rng, {2, 3, 1, 4});
  const auto v = random_tensor(rng, {2, 3, 1, 4});
  EXPECT_LE(max_abs_diff(full_attention(q, k, v), v), 1e-7);
}

TEST(FullAttention, SaturatedSoftmaxSelectsAlignedRow) {
  Rng rng(3);
  const std::size_t n = 8;
  Tensor k({1, 1, n, n});
  for (std::size_t i = 0; i < n; ++i) k[i * n + i] = 1.0f;
  Tensor q = k;
  for (auto& x : q.data()) x *= 50.0f;
  const auto v = random_tensor(rng, {1, 1, n, n});
  EXPECT_LE(max_abs_diff(full_attention(q, k, v), v), 1e-3);
}

TEST(FullAttention, MatchesBruteForce) {
  Rng rng(4);
  const auto q = random_tensor(rng, {2, 2, 16, 8});
  const auto k = random_tensor(rng, {2, 2, 16, 8});
  const auto v = random_tensor(rng, {2, 2, 16, 8});
  EXPECT_LE(max_abs_diff(full_attention(q, k, v), brute_force_attention(q, k, v, kAllTrue)), 1e-5);
}

TEST(FullAttention, ShapeMismatch) {
  EXPECT_THROW(full_attention(Tensor({1, 1, 4, 2}), Tensor({1, 1, 5, 2}), Tensor({1, 1, 4, 2})),
               DimensionError);
}

TEST(Oracle, AllTrueMaskEqualsFullAttention) {
  Rng rng(5);
  const auto q = random_tensor(rng, {1, 2, 20, 8});
  const auto k = random_tensor(rng, {1, 2, 20, 8});
  const auto v = random_tensor(rng, {1, 2, 20, 8});
  EXPECT_EQ(masked_attention_oracle(q, k, v, kAllTrue), full_attention(q, k, v));
}

TEST(Oracle, DiagonalMaskReturnsOwnValue) {
  Rng rng(6);
  const auto q = random_tensor(rng, {1, 1, 10, 4});
  const auto v = random_tensor(rng, {1, 1, 10, 4});
  const auto out = masked_attention_oracle(q, q, v, [](std::size_t i, std::size_t j) { return i == j; });
  EXPECT_EQ(out, v);
}

TEST(Oracle, FullyMaskedRowIsAnError) {
  const Tensor x({1, 1, 3, 2});
  EXPECT_THROW(masked_attention_oracle(x, x, x, [](std::size_t i, std::size_t) { return i != 1; }),
               NumericError);
}

TEST(Oracle, MaskedWeightsAreExactlyZeroAndRowsStochastic) {
  Rng rng(7);
  const WsaConfig cfg{4, 2};
  const auto q = random_tensor(rng, {1, 2, 30, 8}, 3.0);
  Tensor weights;
  masked_attention_oracle(q, q, q, [&](std::size_t i, std::size_t j) { return wsa_mask(i, j, cfg); },
                          &weights);
  const std::size_t n = 30;
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const float w = weights[(h * n + i) * n + j];
        if (!wsa_mask(i, j, cfg)) EXPECT_EQ(w, 0.0f);
        sum += w;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(Wsa, WindowOnlyMatchesOracle) {
  Rng rng(8);
  const auto q = random_tensor(rng, {2, 2, 50, 8});
  const auto k = random_tensor(rng, {2, 2, 50, 8});
  const auto v = random_tensor(rng, {2, 2, 50, 8});
  const WsaConfig cfg{10, 0};
  const auto oracle = masked_attention_oracle(q, k, v, [&](std::size_t i, std::size_t j) { return wsa_mask(i, j, cfg); });
  EXPECT_LE(max_abs_diff(windowed_sink_attention(q, k, v, Tensor(), cfg), oracle), 1e-5);
}

TEST(Wsa, CoveringWindowEqualsFullAttention) {
  Rng rng(9);
  for (std::size_t n : {1u, 7u, 64u, 100u}) {
    const auto q = random_tensor(rng, {1, 2, n, 8});
    const auto k = random_tensor(rng, {1, 2, n, 8});
    const auto v = random_tensor(rng, {1, 2, n, 8});
    EXPECT_LE(max_abs_diff(windowed_sink_attention(q, k, v, Tensor(), WsaConfig{2 * n, 0}),
                           full_attention(q, k, v)),
              1e-6);
  }
}

TEST(Wsa, SelfOnlyWhenWindowIsZero) {
  Rng rng(10);
  const auto q = random_tensor(rng, {1, 1, 1, 4});
  const auto v = random_tensor(rng, {1, 1, 1, 4});
  EXPECT_EQ(windowed_sink_attention(q, q, v, Tensor(), WsaConfig{0, 0}), v);
  const auto qs = random_tensor(rng, {1, 1, 9, 4});
  const auto vs = random_tensor(rng, {1, 1, 9, 4});
  EXPECT_EQ(windowed_sink_attention(qs, qs, vs, Tensor(), WsaConfig{0, 0}), vs);
}

TEST(Wsa, W10S8ConfigurationMatchesOracle) {
  Rng rng(11);
  const WsaConfig cfg{10, 8};
  const auto q = random_tensor(rng, {1, 2, 256, 16});
  const auto k = random_tensor(rng, {1, 2, 256, 16});
  const auto v = random_tensor(rng, {1, 2, 256, 16});
  const auto sinks = random_tensor(rng, {2, 8, 3, 16});
  EXPECT_LE(max_abs_diff(windowed_sink_attention(q, k, v, sinks, cfg), wsa_via_oracle(q, k, v, sinks, cfg)), 1e-5);
}

TEST(Wsa, RandomConfigurationsMatchOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t b = 1 + rng.index(2), h = 1 + rng.index(3), n = 1 + rng.index(90), d = 1 + rng.index(16);
    const std::size_t windows[] = {0, 2, 10, 64};
    const std::size_t sink_counts[] = {0, 1, 8};
    const WsaConfig cfg{windows[rng.index(4)], sink_counts[rng.index(3)]};
    const auto q = random_tensor(rng, {b, h, n, d});
    const auto k = random_tensor(rng, {b, h, n, d});
    const auto v = random_tensor(rng, {b, h, n, d});
    const auto sinks = random_tensor(rng, {h, cfg.sinks, 3, d});
    EXPECT_LE(max_abs_diff(windowed_sink_attention(q, k, v, sinks, cfg), wsa_via_oracle(q, k, v, sinks, cfg)), 1e-5)
        << "b=" << b << " h=" << h << " n=" << n << " d=" << d << " W=" << cfg.window << " S=" << cfg.sinks;
  }
}

TEST(Wsa, SinkShapeChecked) {
  Rng rng(13);
  const auto x = random_tensor(rng, {1, 2, 8, 4});
  EXPECT_THROW(windowed_sink_attention(x, x, x, Tensor({2, 3, 3, 4}), WsaConfig{2, 2}), DimensionError);
}

TEST(Wsa, ScratchStaysLinearInSequenceLength) {
  Rng rng(14);
  const WsaConfig cfg{10, 8};
  for (std::size_t n : {256u, 801u, 2000u}) {
    const auto q = random_tensor(rng, {1, 1, n, 8});
    const auto sinks = random_tensor(rng, {1, 8, 3, 8});
    ScratchProbe probe;
    const auto fwd = windowed_sink_attention_forward(q, q, q, sinks, cfg, &probe);
    windowed_sink_attention_backward(q, q, q, sinks, cfg, fwd, q, &probe);
    EXPECT_GT(probe.allocations(), 0u);
    EXPECT_LE(probe.largest(), n * (cfg.window + cfg.sinks + 1));
    EXPECT_LT(probe.largest(), n * n / 8);
  }
  ScratchProbe dense;
  const auto q = random_tensor(rng, {1, 1, 300, 8});
  full_attention(q, q, q, nullptr, &dense);
  EXPECT_EQ(dense.largest(), 300u * 300u);
}

TEST(Wsa, ThreadCountDoesNotChangeBits) {
  Rng rng(15);
  const WsaConfig cfg{6, 2};
  const auto q = random_tensor(rng, {3, 4, 70, 8});
  const auto sinks = random_tensor(rng, {4, 2, 3, 8});
  setenv("WSA_THREADS", "1", 1);
  const auto a = windowed_sink_attention_forward(q, q, q, sinks, cfg);
  const auto ga = windowed_sink_attention_backward(q, q, q, sinks, cfg, a, q);
  setenv("WSA_THREADS", "4", 1);
  const auto b = windowed_sink_attention_forward(q, q, q, sinks, cfg);
  const auto gb = windowed_sink_attention_backward(q, q, q, sinks, cfg, b, q);
  unsetenv("WSA_THREADS");
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(ga.q, gb.q);
  EXPECT_EQ(ga.sink_kqv, gb.sink_kqv);
}

// Central differences in double on L = sum(out * w) for a fixed random w.
template <class Forward>
void check_gradients(Forward forward, std::vector<BasicTensor<double>*> inputs,
                     const std::vector<const BasicTensor<double>*>& analytic, const BasicTensor<double>& w) {
  const double eps = 1e-6;
  auto loss = [&] {
    const auto out = forward();
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return s;
  };
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    auto& x = *inputs[a];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + eps;
      const double up = loss();
      x[i] = orig - eps;
      const double down = loss();
      x[i] = orig;
      EXPECT_NEAR((*analytic[a])[i], (up - down) / (2 * eps), 1e-6) << "input " << a << " index " << i;
    }
  }
}

TEST(Backward, FullAttentionMatchesFiniteDifferences) {
  Rng rng(16);
  auto q = random_tensor<double>(rng, {1, 2, 6, 4});
  auto k = random_tensor<double>(rng, {1, 2, 6, 4});
  auto v = random_tensor<double>(rng, {1, 2, 6, 4});
  const auto w = random_tensor<double>(rng, {1, 2, 6, 4});
  const auto g = full_attention_backward(q, k, v, w);
  check_gradients([&] { return full_attention(q, k, v); }, {&q, &k, &v}, {&g.q, &g.k, &g.v}, w);
}

TEST(Backward, WindowedSinkAttentionMatchesFiniteDifferences) {
  Rng rng(17);
  const WsaConfig cfg{2, 2};
  auto q = random_tensor<double>(rng, {2, 2, 9, 4});
  auto k = random_tensor<double>(rng, {2, 2, 9, 4});
  auto v = random_tensor<double>(rng, {2, 2, 9, 4});
  auto sinks = random_tensor<double>(rng, {2, 2, 3, 4});
  const auto w = random_tensor<double>(rng, {2, 2, 9, 4});
  const auto fwd = windowed_sink_attention_forward(q, k, v, sinks, cfg);
  const auto g = windowed_sink_attention_backward(q, k, v, sinks, cfg, fwd, w);
  check_gradients([&] { return windowed_sink_attention(q, k, v, sinks, cfg); }, {&q, &k, &v, &sinks},
                  {&g.q, &g.k, &g.v, &g.sink_kqv}, w);
}

TEST(Rope, PositionZeroIsIdentity) {
  Rng rng(18);
  const auto x = random_tensor(rng, {1, 8});
  EXPECT_EQ(rope_rotate(x), x);
}

TEST(Rope, PreservesNormsAndInverts) {
  Rng rng(19);
  const auto x = random_tensor(rng, {2, 3, 40, 16});
  const auto y = rope_rotate(x);
  for (std::size_t r = 0; r < x.size() / 16; ++r) {
    double nx = 0, ny = 0;
    for (std::size_t t = 0; t < 16; ++t) {
      nx += double(x[r * 16 + t]) * x[r * 16 + t];
      ny += double(y[r * 16 + t]) * y[r * 16 + t];
    }
    EXPECT_NEAR(std::sqrt(nx), std::sqrt(ny), 1e-5);
  }
  EXPECT_LE(max_abs_diff(rope_rotate(y, 10000.0, true), x), 1e-5);
}

TEST(Rope, DotProductDependsOnlyOnOffset) {
  Rng rng(20);
  const std::size_t d = 8;
  const auto q = random_tensor(rng, {1, d});
  const auto k = random_tensor(rng, {1, d});
  auto at = [&](const Tensor& v, std::size_t p) {
    Tensor seq({p + 1, d});
    std::copy(v.data().begin(), v.data().end(), seq.raw() + p * d);
    const auto r = rope_rotate(seq);
    return std::vector<float>(r.raw() + p * d, r.raw() + (p + 1) * d);
  };
  auto dotp = [](const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
    return s;
  };
  EXPECT_NEAR(dotp(at(q, 3), at(k, 1)), dotp(at(q, 7), at(k, 5)), 1e-4);
}

TEST(Rope, OddDimensionRejected) { EXPECT_THROW(rope_rotate(Tensor({4, 3})), DimensionError); }

TEST(Flops, ReferenceArithmetic) {
  const auto full = attention_flops(801, AttentionMode::full);
  EXPECT_EQ(full.score_count, 641601u);
  EXPECT_EQ(full.reduction_vs_full, 1.0);
  const auto wsa = attention_flops(801, AttentionMode::wsa, WsaConfig{10, 8});
  EXPECT_EQ(wsa.score_count, 14418u);
  EXPECT_NEAR(wsa.reduction_vs_full, 44.5, 0.05);
}

TEST(Flops, WindowOnlySweepRoundsToTableValues) {
  const std::pair<std::size_t, double> rows[] = {{200, 4}, {100, 8}, {50, 16}, {20, 40}, {10, 80}};
  for (const auto& [w, expected] : rows) {
    EXPECT_EQ(std::round(attention_flops(801, AttentionMode::window_only, WsaConfig{w, 0}).reduction_vs_full),
              expected);
  }
}

TEST(Flops, CoveringWindowClampsToFull) {
  const auto r = attention_flops(100, AttentionMode::window_only, WsaConfig{200, 0});
  EXPECT_EQ(r.score_count, 10000u);
  EXPECT_EQ(r.reduction_vs_full, 1.0);
  EXPECT_THROW(attention_flops(0, AttentionMode::full), ConfigError);
}

}  // namespace
}  // namespace wsa::attention
