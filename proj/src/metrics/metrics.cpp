// SPDX-License-Identifier: Apache-2.0

#include "wsa/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wsa/core/error.hpp"
#include "wsa/dsp/mel.hpp"
#include "wsa/dsp/stft.hpp"

namespace wsa::metrics {

void MetricConfig::validate() const {
  if (!(sdr_cap_db > 0)) throw ConfigError("sdr_cap_db must be positive");
  if (!(eps > 0)) throw ConfigError("eps must be positive");
  if (!(chunk_seconds > 0)) throw ConfigError("chunk_seconds must be positive");
  if (mel_bands == 0) throw ConfigError("mel_bands must be >= 1");
  if (!(db_floor < 0)) throw ConfigError("db_floor must be negative");
  dsp::StftConfig{fft_size, hop, 1.0}.validate();
}

namespace {

void require_matching(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref) {
  est.validate();
  ref.validate();
  if (est.channels() != ref.channels() || est.length() != ref.length()) {
    throw DimensionError("estimate is " + std::to_string(est.channels()) + " x " + std::to_string(est.length()) +
                         ", reference " + std::to_string(ref.channels()) + " x " + std::to_string(ref.length()));
  }
}

// SDR over samples [begin, end) of every channel.
double span_sdr(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, std::size_t begin, std::size_t end,
                const MetricConfig& cfg) {
  double signal = 0, error = 0;
  for (std::size_t c = 0; c < ref.channels(); ++c) {
    for (std::size_t i = begin; i < end; ++i) {
      const double r = ref.samples[c][i], d = r - double(est.samples[c][i]);
      signal += r * r;
      error += d * d;
    }
  }
  const double db = 10.0 * std::log10((signal + cfg.eps) / (error + cfg.eps));
  return std::clamp(db, -cfg.sdr_cap_db, cfg.sdr_cap_db);
}

// Mel power cells of every channel, concatenated.
std::vector<double> mel_power(const dsp::AudioBuffer& audio, const std::vector<std::vector<double>>& fb,
                              const dsp::StftConfig& stft) {
  const ComplexTensor spec = dsp::stft(audio, stft);
  const std::size_t channels = spec.dim(0), bins = spec.dim(1), frames = spec.dim(2);
  std::vector<double> out;
  out.reserve(channels * fb.size() * frames);
  std::vector<double> power(bins);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < bins; ++k) {
        const std::size_t i = (c * bins + k) * frames + t;
        const double re = spec.re()[i], im = spec.im()[i];
        power[k] = re * re + im * im;
      }
      for (const auto& filter : fb) {
        double s = 0;
        for (std::size_t k = 0; k < bins; ++k) s += filter[k] * power[k];
        out.push_back(s);
      }
    }
  }
  return out;
}

struct MelDb {
  std::vector<double> est, ref;
};

MelDb mel_db(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg) {
  cfg.validate();
  require_matching(est, ref);
  if (ref.length() == 0) throw DimensionError("metrics need at least one sample");
  const dsp::StftConfig stft{cfg.fft_size, cfg.hop, ref.sample_rate};
  const auto fb = dsp::mel_filterbank(cfg.mel_bands, cfg.fft_size, ref.sample_rate);
  MelDb out{mel_power(est, fb, stft), mel_power(ref, fb, stft)};
  const double peak = *std::max_element(out.ref.begin(), out.ref.end());
  auto to_db = [&](std::vector<double>& cells) {
    for (double& x : cells) x = std::max(cfg.db_floor, 10.0 * std::log10((x + cfg.eps) / (peak + cfg.eps)));
  };
  to_db(out.est);
  to_db(out.ref);
  return out;
}

double score(double mean_db, const MetricConfig& cfg) {
  return 100.0 * std::max(0.0, 1.0 - mean_db / std::abs(cfg.db_floor));
}

}  // namespace

double sdr(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg) {
  cfg.validate();
  require_matching(est, ref);
  return span_sdr(est, ref, 0, ref.length(), cfg);
}

std::vector<double> chunk_sdrs(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg) {
  cfg.validate();
  require_matching(est, ref);
  const auto chunk = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.chunk_seconds * ref.sample_rate)));
  const std::size_t len = ref.length();
  if (2 * len < chunk) {
    throw DimensionError("input of " + std::to_string(len) + " samples is shorter than half a chunk (" +
                         std::to_string(chunk) + " samples)");
  }
  std::vector<double> out;
  std::size_t begin = 0;
  for (; begin + chunk <= len; begin += chunk) out.push_back(span_sdr(est, ref, begin, begin + chunk, cfg));
  if (2 * (len - begin) >= chunk) out.push_back(span_sdr(est, ref, begin, len, cfg));
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DimensionError("median of an empty list");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

double csdr(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg) {
  return median(chunk_sdrs(est, ref, cfg));
}

double fullness(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg) {
  const MelDb db = mel_db(est, ref, cfg);
  double deficit = 0;
  for (std::size_t i = 0; i < db.ref.size(); ++i) deficit += std::max(0.0, db.ref[i] - db.est[i]);
  return score(deficit / double(db.ref.size()), cfg);
}

double bleedless(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg) {
  const MelDb db = mel_db(est, ref, cfg);
  double excess = 0;
  for (std::size_t i = 0; i < db.ref.size(); ++i) excess += std::max(0.0, db.est[i] - db.ref[i]);
  return score(excess / double(db.ref.size()), cfg);
}

MetricReport evaluate(const dsp::AudioBuffer& est, const dsp::AudioBuffer& ref, const MetricConfig& cfg) {
  MetricReport r;
  r.sdr = sdr(est, ref, cfg);
  try {
    r.csdr = csdr(est, ref, cfg);
  } catch (const DimensionError&) {
    r.csdr = std::numeric_limits<double>::quiet_NaN();
  }
  r.fullness = fullness(est, ref, cfg);
  r.bleedless = bleedless(est, ref, cfg);
  return r;
}

}  // namespace wsa::metrics
