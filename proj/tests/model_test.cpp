// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "wsa/autograd/ops.hpp"
#include "wsa/core/io.hpp"
#include "wsa/core/rng.hpp"
#include "wsa/model/checkpoint.hpp"

namespace wsa::model {
namespace {

using autograd::ParamBinder;
using autograd::Var;

dsp::AudioBuffer test_audio(std::size_t length, std::uint64_t seed, std::size_t channels = 1,
                            double sample_rate = 16000.0) {
  Rng rng(seed);
  dsp::AudioBuffer audio;
  audio.sample_rate = sample_rate;
  for (std::size_t c = 0; c < channels; ++c) {
    std::vector<float> x(length);
    const double f0 = 180.0 + 40.0 * rng.uniform();
    for (std::size_t i = 0; i < length; ++i) {
      const double t = double(i) / sample_rate;
      x[i] = static_cast<float>(0.4 * std::sin(2 * std::numbers::pi * f0 * t) +
                                0.2 * std::sin(2 * std::numbers::pi * 3.1 * f0 * t) + 0.05 * rng.normal());
    }
    audio.samples.push_back(std::move(x));
  }
  return audio;
}

Tensor random_features(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = static_cast<float>(rng.normal());
  return t;
}

double max_sample_diff(const dsp::AudioBuffer& a, const dsp::AudioBuffer& b) {
  double m = 0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    for (std::size_t i = 0; i < a.length(); ++i) m = std::max(m, double(std::abs(a.samples[c][i] - b.samples[c][i])));
  }
  return m;
}

// Zero attention and feed-forward output projections.
void zero_residual_branches(LayerParams<float>& layer) {
  layer.out.weight.fill(0);
  layer.out.bias.fill(0);
  layer.ff_out.weight.fill(0);
  layer.ff_out.bias.fill(0);
}

// Mask heads that emit (1, 0) for every bin, divided by the bin's band count
// so overlapping bands still sum to a unit mask.
void make_unit_mask_heads(SepModel& m) {
  const auto mult = m.bands.bin_multiplicity();
  for (std::size_t b = 0; b < m.band_out.size(); ++b) {
    m.band_out[b].weight.fill(0);
    m.band_out[b].bias.fill(0);
    const auto& band = m.bands.bands[b];
    for (std::size_t f = band.lo; f <= band.hi; ++f) {
      m.band_out[b].bias[2 * (f - band.lo)] = 1.0f / static_cast<float>(mult[f]);
    }
  }
}

TEST(Config, ValidatesGeometry) {
  ModelConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.model_dim = 60;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.blocks = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.num_bands = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.wsa.window = 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  ModelConfig cfg = reference_model_config();
  cfg.attention_mode = AttentionKind::wsa;
  cfg.wsa = {20, 4};
  EXPECT_EQ(model_config_from_json(to_json(cfg)), cfg);
  EXPECT_EQ(model_config_from_json("{}"), toy_model_config());
  EXPECT_THROW(model_config_from_json(R"({"num_bandz": 3})"), ConfigError);
  EXPECT_THROW(model_config_from_json(R"({"attention_mode": "sparse"})"), ConfigError);
  EXPECT_THROW(model_config_from_json("{"), ConfigError);
}

TEST(BandSplit, ZeroSpectrogramZeroBiasGivesZeroFeatures) {
  SepModel m = init_toy_model(toy_model_config(), 1);
  for (auto& lin : m.band_in) lin.bias.fill(0);
  ParamBinder<float> bind(false);
  const ComplexTensor spec({m.config.stft.bins(), 7});
  const auto x = band_split(m, bind, spec);
  EXPECT_EQ(x.shape(), (Shape{m.config.num_bands, 7, m.config.model_dim}));
  for (float v : x.value().data()) EXPECT_EQ(v, 0.0f);
}

TEST(BandSplit, SingleBandIsFramewiseLinearLayer) {
  ModelConfig cfg;
  cfg.num_bands = 1;
  const SepModel m = init_toy_model(cfg, 2);
  ASSERT_EQ(m.bands.bands.front().lo, 0u);
  ASSERT_EQ(m.bands.bands.front().hi, cfg.stft.bins() - 1);
  Rng rng(3);
  const std::size_t bins = cfg.stft.bins(), frames = 5;
  ComplexTensor spec({bins, frames});
  for (auto& v : spec.re()) v = static_cast<float>(rng.normal());
  for (auto& v : spec.im()) v = static_cast<float>(rng.normal());
  ParamBinder<float> bind(false);
  const auto x = band_split(m, bind, spec);
  const auto& w = m.band_in[0].weight;
  const auto& b = m.band_in[0].bias;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < cfg.model_dim; ++j) {
      double s = b[j];
      for (std::size_t f = 0; f < bins; ++f) {
        s += double(spec.re()[f * frames + t]) * w.at(2 * f, j) + double(spec.im()[f * frames + t]) * w.at(2 * f + 1, j);
      }
      EXPECT_NEAR(x.value()[t * cfg.model_dim + j], s, 1e-4);
    }
  }
}

TEST(BandSplit, RejectsMismatchedSpectrogram) {
  const SepModel m = init_toy_model(toy_model_config(), 1);
  ParamBinder<float> bind(false);
  EXPECT_THROW(band_split(m, bind, ComplexTensor({m.config.stft.bins() + 1, 4})), DimensionError);
}

TEST(TimeLayer, ZeroOutputProjectionsGiveIdentity) {
  SepModel m = init_toy_model(toy_model_config(), 4);
  zero_residual_branches(m.blocks[0].time);
  zero_residual_branches(m.blocks[0].freq);
  Rng rng(5);
  const Tensor x = random_features(rng, {m.config.num_bands, 9, m.config.model_dim});
  ParamBinder<float> bind(false);
  EXPECT_EQ(time_layer(m, 0, bind, Var<float>::constant(x)).value(), x);
  EXPECT_EQ(freq_layer(m, 0, bind, Var<float>::constant(x)).value(), x);
}

TEST(TimeLayer, BandsAreIndependent) {
  const SepModel m = init_toy_model(toy_model_config(), 6);
  Rng rng(7);
  const std::size_t nb = m.config.num_bands, frames = 11, d = m.config.model_dim;
  const Tensor x = random_features(rng, {nb, frames, d});
  Tensor permuted(x.shape());
  for (std::size_t b = 0; b < nb; ++b) {
    std::copy_n(x.raw() + (nb - 1 - b) * frames * d, frames * d, permuted.raw() + b * frames * d);
  }
  ParamBinder<float> bind(false);
  const Tensor y = time_layer(m, 0, bind, Var<float>::constant(x)).value();
  const Tensor yp = time_layer(m, 0, bind, Var<float>::constant(permuted)).value();
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i = 0; i < frames * d; ++i) {
      ASSERT_EQ(yp[b * frames * d + i], y[(nb - 1 - b) * frames * d + i]);
    }
  }
}

TEST(TimeLayer, CoveringWindowMatchesFullAttention) {
  const SepModel full = init_toy_model(toy_model_config(), 8);
  const std::size_t frames = 13;
  const SepModel wsa = convert_to_wsa(full, {2 * frames, 0});
  Rng rng(9);
  const Tensor x = random_features(rng, {full.config.num_bands, frames, full.config.model_dim});
  ParamBinder<float> b1(false), b2(false);
  const auto a = time_layer(full, 1, b1, Var<float>::constant(x)).value();
  const auto b = time_layer(wsa, 1, b2, Var<float>::constant(x)).value();
  EXPECT_LE(max_abs_diff(a, b), 1e-5);
}

TEST(FreqLayer, FramesAreIndependent) {
  const SepModel m = init_toy_model(toy_model_config(), 10);
  Rng rng(11);
  const std::size_t nb = m.config.num_bands, frames = 6, d = m.config.model_dim;
  const Tensor x = random_features(rng, {nb, frames, d});
  const std::vector<std::size_t> order{3, 0, 5, 1, 4, 2};
  Tensor shuffled(x.shape());
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy_n(x.raw() + (b * frames + order[t]) * d, d, shuffled.raw() + (b * frames + t) * d);
    }
  }
  ParamBinder<float> bind(false);
  const Tensor y = freq_layer(m, 0, bind, Var<float>::constant(x)).value();
  const Tensor ys = freq_layer(m, 0, bind, Var<float>::constant(shuffled)).value();
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        ASSERT_EQ(ys[(b * frames + t) * d + j], y[(b * frames + order[t]) * d + j]);
      }
    }
  }
}

TEST(FreqLayer, ReferenceGeometryCapturesSixtyBySixtyMaps) {
  const SepModel m = init_toy_model(reference_model_config(), 12);
  const auto audio = test_audio(8820, 13, 1, 44100.0);  // 0.2 s, 21 frames
  ParamBinder<float> bind(false);
  std::vector<AttentionRecord> records;
  separate_graph(m, bind, audio, &records);
  ASSERT_EQ(records.size(), 12u);
  for (const auto& r : records) {
    if (r.axis == Axis::frequency) {
      EXPECT_EQ(r.map.shape(), (Shape{60, 60}));
    } else {
      EXPECT_EQ(r.map.shape(), (Shape{21, 21}));
    }
  }
}

TEST(EstimateMasks, UnitHeadsOnDisjointBandsGiveUnitMask) {
  ModelConfig cfg;
  cfg.band_overlap_bins = 0;
  SepModel m = init_toy_model(cfg, 14);
  for (auto v : m.bands.bin_multiplicity()) ASSERT_EQ(v, 1u);
  make_unit_mask_heads(m);
  Rng rng(15);
  ParamBinder<float> bind(false);
  const auto mask = estimate_masks(m, bind, Var<float>::constant(random_features(rng, {cfg.num_bands, 4, cfg.model_dim})));
  ASSERT_EQ(mask.shape(), (Shape{2, cfg.stft.bins(), 4}));
  const std::size_t n = cfg.stft.bins() * 4;
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(mask.value()[i], 1.0f);
    EXPECT_EQ(mask.value()[n + i], 0.0f);
  }
}

TEST(EstimateMasks, OverlappingBinsSumContributions) {
  SepModel m = init_toy_model(toy_model_config(), 16);
  for (auto& lin : m.band_out) {
    lin.weight.fill(0);
    lin.bias.fill(1);
  }
  ParamBinder<float> bind(false);
  const auto mask = estimate_masks(m, bind, Var<float>::constant(Tensor({m.config.num_bands, 3, m.config.model_dim})));
  const auto mult = m.bands.bin_multiplicity();
  bool any_overlap = false;
  for (std::size_t f = 0; f < mult.size(); ++f) {
    any_overlap |= mult[f] > 1;
    EXPECT_EQ(mask.value()[f * 3], static_cast<float>(mult[f]));
  }
  EXPECT_TRUE(any_overlap);
}

TEST(Separate, UnitMaskReconstructsInput) {
  SepModel m = init_toy_model(toy_model_config(), 17);
  make_unit_mask_heads(m);
  const auto mix = test_audio(16000, 18, 2);
  const auto out = separate(m, mix);
  for (std::size_t c = 0; c < 2; ++c) {
    double sig = 0, err = 0;
    for (std::size_t i = 0; i < mix.length(); ++i) {
      sig += double(mix.samples[c][i]) * mix.samples[c][i];
      const double e = double(out.audio.samples[c][i]) - mix.samples[c][i];
      err += e * e;
    }
    EXPECT_GE(10 * std::log10(sig / err), 60.0);
  }
}

TEST(Separate, OutputLengthMatchesInputInEveryMode) {
  const SepModel full = init_toy_model(toy_model_config(), 19);
  const SepModel wsa = convert_to_wsa(full, {10, 8});
  for (std::size_t len : {1u, 127u, 128u, 300u, 1001u, 4096u}) {
    const auto mix = test_audio(len, len, 2);
    for (const SepModel* m : {&full, &wsa}) {
      const auto out = separate(*m, mix);
      ASSERT_EQ(out.audio.channels(), 2u);
      EXPECT_EQ(out.audio.length(), len);
      EXPECT_EQ(out.mask.shape(), (Shape{2, m->config.stft.bins(), m->config.stft.frames(len)}));
    }
  }
}

TEST(Separate, DeterministicAndFinite) {
  const auto mix = test_audio(16000, 20);
  const auto a = separate(init_toy_model(toy_model_config(), 21), mix);
  const auto b = separate(init_toy_model(toy_model_config(), 21), mix);
  EXPECT_EQ(a.audio, b.audio);
  EXPECT_EQ(a.mask, b.mask);
  for (float v : a.audio.samples[0]) ASSERT_TRUE(std::isfinite(v));
}

TEST(Separate, RejectsSampleRateMismatch) {
  const SepModel m = init_toy_model(toy_model_config(), 22);
  EXPECT_THROW(separate(m, test_audio(1000, 1, 1, 44100.0)), ConfigError);
}

TEST(Init, SeedControlsParameters) {
  const auto a = init_toy_model(toy_model_config(), 5);
  const auto b = init_toy_model(toy_model_config(), 5);
  const auto c = init_toy_model(toy_model_config(), 6);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(*pa[i].second, *pb[i].second);
    differs |= *pa[i].second != *pc[i].second;
  }
  EXPECT_TRUE(differs);
}

TEST(Init, WeightsRespectFanInBound) {
  const auto m = init_toy_model(toy_model_config(), 7);
  for (const auto& [name, t] : m.parameters()) {
    if (name.ends_with(".weight")) {
      const double bound = 1.0 / std::sqrt(double(t->dim(0)));
      for (float v : t->data()) ASSERT_LE(std::abs(v), bound) << name;
    }
  }
}

TEST(Sites, TwoPerBlock) {
  const auto toy = attention_sites(toy_model_config(), 126);
  ASSERT_EQ(toy.size(), 4u);
  EXPECT_EQ(toy[0].axis, Axis::time);
  EXPECT_EQ(toy[0].seq_len, 126u);
  EXPECT_EQ(toy[1].axis, Axis::frequency);
  EXPECT_EQ(toy[1].seq_len, 12u);
  EXPECT_EQ(attention_sites(reference_model_config(), 801).size(), 12u);
}

TEST(Convert, CoveringWindowIsFunctionalIdentity) {
  const SepModel full = init_toy_model(toy_model_config(), 23);
  const auto mix = test_audio(8000, 24);
  const std::size_t frames = full.config.stft.frames(mix.length());
  const SepModel wsa = convert_to_wsa(full, {2 * frames, 0});
  EXPECT_LE(max_sample_diff(separate(full, mix).audio, separate(wsa, mix).audio), 1e-5);
}

TEST(Convert, NarrowWindowChangesOutput) {
  const SepModel full = init_toy_model(toy_model_config(), 25);
  const auto mix = test_audio(8000, 26);
  const SepModel wsa = convert_to_wsa(full, {10, 0});
  EXPECT_GT(max_sample_diff(separate(full, mix).audio, separate(wsa, mix).audio), 1e-4);
}

TEST(Convert, CopiesWeightsAndLeavesFrequencyLayersAlone) {
  const SepModel full = init_toy_model(toy_model_config(), 27);
  const SepModel wsa = convert_to_wsa(full, {10, 8});
  EXPECT_EQ(wsa.config.attention_mode, AttentionKind::wsa);
  EXPECT_EQ(wsa.config.wsa, (attention::WsaConfig{10, 8}));
  for (std::size_t l = 0; l < full.blocks.size(); ++l) {
    const auto& f = full.blocks[l].freq;
    const auto& w = wsa.blocks[l].freq;
    EXPECT_EQ(f.query.weight, w.query.weight);
    EXPECT_EQ(f.ff_out.weight, w.ff_out.weight);
    EXPECT_TRUE(w.sink_kqv.empty());
    EXPECT_EQ(full.blocks[l].time.key.weight, wsa.blocks[l].time.key.weight);
    EXPECT_EQ(wsa.blocks[l].time.sink_kqv, Tensor({4, 8, 3, 16}));
  }
  EXPECT_EQ(wsa.parameter_count(), full.parameter_count() + 2 * 4 * 8 * 3 * 16);
  EXPECT_THROW(convert_to_wsa(wsa, {10, 8}), ConfigError);
}

TEST(Cast, DoubleModelMatchesFloatModel) {
  const SepModel m = init_toy_model(toy_model_config(), 28);
  const auto md = m.cast<double>();
  const auto mix = test_audio(4000, 29);
  ParamBinder<double> bind(false);
  const auto graph = separate_graph(md, bind, mix);
  const auto out = separate(m, mix);
  for (std::size_t i = 0; i < mix.length(); ++i) {
    ASSERT_NEAR(graph.audio[0].value()[i], out.audio.samples[0][i], 1e-4);
  }
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("wsa_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  const SepModel m = convert_to_wsa(init_toy_model(toy_model_config(), 30), {10, 8});
  save_checkpoint(m, dir_ / "a.bin");
  const SepModel loaded = load_checkpoint(dir_ / "a.bin");
  save_checkpoint(loaded, dir_ / "b.bin");
  EXPECT_EQ(read_file(dir_ / "a.bin"), read_file(dir_ / "b.bin"));
  EXPECT_EQ(loaded.config, m.config);
  const auto mix = test_audio(4000, 31);
  EXPECT_EQ(separate(loaded, mix).audio, separate(m, mix).audio);
}

TEST_F(CheckpointTest, ManifestLayoutIsContiguous) {
  const std::string bytes = serialize_checkpoint(init_toy_model(toy_model_config(), 32));
  const auto nl = bytes.find('\n');
  ASSERT_NE(nl, std::string::npos);
  const SepModel m = make_model<float>(toy_model_config());
  EXPECT_EQ(bytes.size() - nl - 1, 4 * m.parameter_count());
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  if (pos != std::string::npos) s.replace(pos, from.size(), to);
  return s;
}

TEST_F(CheckpointTest, CorruptedByteLenNamesTensor) {
  const std::string bytes = serialize_checkpoint(init_toy_model(toy_model_config(), 33));
  // band_in.0.bias is [64] -> 256 bytes.
  const std::string entry = R"("byte_len":256,"byte_offset":)";
  const auto pos = bytes.find(entry);
  ASSERT_NE(pos, std::string::npos);
  std::string bad = bytes;
  bad.replace(pos, entry.size(), R"("byte_len":255,"byte_offset":)");
  try {
    deserialize_checkpoint(bad);
    FAIL() << "expected CheckpointShapeError";
  } catch (const CheckpointShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("band_in.0.bias"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("byte_len"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointTest, DistinctErrorsForVersionShapeAndTruncation) {
  const std::string bytes = serialize_checkpoint(init_toy_model(toy_model_config(), 34));
  EXPECT_THROW(deserialize_checkpoint(replace_once(bytes, R"("format_version":1)", R"("format_version":2)")),
               CheckpointVersionError);
  EXPECT_THROW(deserialize_checkpoint(replace_once(bytes, R"("model_dim":64)", R"("model_dim":32)")),
               ConfigError);
  EXPECT_THROW(deserialize_checkpoint(replace_once(bytes, R"("shape":[64])", R"("shape":[65])")),
               CheckpointShapeError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointTruncatedError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, 40)), CheckpointTruncatedError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "xx"), CheckpointFormatError);
}

TEST_F(CheckpointTest, MissingFileIsIoErrorWithPath) {
  try {
    load_checkpoint(dir_ / "nope.bin");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.bin"), std::string::npos);
  }
}

}  // namespace
}  // namespace wsa::model
