// SPDX-License-Identifier: Apache-2.0

#include "wsa/losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "wsa/autograd/ops.hpp"

namespace wsa::losses {

using autograd::Var;

void LossWeights::validate() const {
  if (!(lambda_mse >= 0) || !(lambda_cos >= 0)) throw ConfigError("loss weights must be non-negative");
}

namespace {

void require_matching(const dsp::AudioBuffer& a, const dsp::AudioBuffer& b) {
  a.validate();
  b.validate();
  if (a.channels() != b.channels() || a.length() != b.length()) {
    throw DimensionError("audio shapes differ: " + std::to_string(a.channels()) + " x " + std::to_string(a.length()) +
                         " vs " + std::to_string(b.channels()) + " x " + std::to_string(b.length()));
  }
}

}  // namespace

double recon_loss(const dsp::AudioBuffer& est, const dsp::AudioBuffer& target,
                  std::span<const dsp::StftConfig> resolutions) {
  require_matching(est, target);
  double time_sum = 0;
  for (std::size_t c = 0; c < est.channels(); ++c) {
    for (std::size_t i = 0; i < est.length(); ++i) time_sum += std::abs(double(est.samples[c][i]) - target.samples[c][i]);
  }
  double loss = time_sum / double(est.channels() * est.length());
  for (const auto& cfg : resolutions) {
    const ComplexTensor a = dsp::stft(est, cfg);
    const ComplexTensor b = dsp::stft(target, cfg);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      s += std::abs(double(a.re()[i]) - b.re()[i]) + std::abs(double(a.im()[i]) - b.im()[i]);
    }
    loss += s / double(2 * a.size());
  }
  return loss;
}

DistillTerms mask_distill_loss(const ComplexTensor& student, const ComplexTensor& teacher) {
  if (student.shape() != teacher.shape() || student.rank() != 3) {
    throw DimensionError("mask shapes " + shape_string(student.shape()) + " and " + shape_string(teacher.shape()) +
                         " must match and be [C x F x T]");
  }
  const std::size_t channels = student.dim(0);
  const std::size_t per = student.size() / std::max<std::size_t>(channels, 1);
  double sq = 0, cos_sum = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    double dot = 0, ns = 0, nt = 0;
    for (std::size_t i = c * per; i < (c + 1) * per; ++i) {
      const double sr = student.re()[i], si = student.im()[i];
      const double tr = teacher.re()[i], ti = teacher.im()[i];
      sq += (sr - tr) * (sr - tr) + (si - ti) * (si - ti);
      dot += sr * tr + si * ti;
      ns += sr * sr + si * si;
      nt += tr * tr + ti * ti;
    }
    if (ns == 0 && nt == 0) throw NumericError("cosine similarity of two all-zero masks is undefined");
    const double cos = (ns > 0 && nt > 0) ? std::clamp(dot / std::sqrt(ns * nt), -1.0, 1.0) : 0.0;
    cos_sum += 1.0 - cos;
  }
  return {sq / double(2 * student.size()), cos_sum / double(channels)};
}

LossBreakdown total_loss(const model::Separation& student, const dsp::AudioBuffer& target,
                         const ComplexTensor& teacher_mask, const LossWeights& w,
                         std::span<const dsp::StftConfig> resolutions) {
  w.validate();
  LossBreakdown out;
  out.recon = recon_loss(student.audio, target, resolutions);
  const DistillTerms d = mask_distill_loss(student.mask, teacher_mask);
  out.distill_mse = d.mse;
  out.distill_cos = d.cos_term;
  out.total = out.recon + w.lambda_mse * d.mse + w.lambda_cos * d.cos_term;
  return out;
}

template <class Real>
LossGraph<Real> total_loss_graph(const model::SeparationGraph<Real>& student, const dsp::AudioBuffer& target,
                                 const ComplexTensor& teacher_mask, const LossWeights& w,
                                 std::span<const dsp::StftConfig> resolutions) {
  using namespace autograd;
  w.validate();
  target.validate();
  const std::size_t channels = student.audio.size();
  if (channels == 0 || target.channels() != channels || student.audio[0].shape() != Shape{target.length()}) {
    throw DimensionError("student output and target audio differ in shape");
  }
  if (teacher_mask.rank() != 3 || teacher_mask.dim(0) != channels) {
    throw DimensionError("teacher mask " + shape_string(teacher_mask.shape()) + " does not have " +
                         std::to_string(channels) + " channels");
  }
  const std::size_t len = target.length();

  // Reconstruction: time-domain L1 plus one complex L1 term per resolution.
  std::vector<BasicTensor<Real>> targets;
  for (const auto& ch : target.samples) targets.emplace_back(Shape{len}, std::vector<Real>(ch.begin(), ch.end()));
  Var<Real> time_term;
  for (std::size_t c = 0; c < channels; ++c) {
    const Var<Real> term = abs_sum(sub_const(student.audio[c], targets[c]));
    time_term = c == 0 ? term : add(time_term, term);
  }
  Var<Real> recon = scale(time_term, 1.0 / double(channels * len));
  for (const auto& cfg : resolutions) {
    Var<Real> spec_term;
    std::size_t count = 0;
    for (std::size_t c = 0; c < channels; ++c) {
      const Var<Real> ref = stft(Var<Real>::constant(targets[c]), cfg);
      const Var<Real> term = abs_sum(sub_const(stft(student.audio[c], cfg), ref.value()));
      count += ref.value().size();
      spec_term = c == 0 ? term : add(spec_term, term);
    }
    recon = add(recon, scale(spec_term, 1.0 / double(count)));
  }

  // Mask distillation: MSE over all (re, im) elements, cosine per channel.
  const std::size_t per = teacher_mask.size() / channels;
  Var<Real> sq, cos;
  std::size_t elements = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const Var<Real>& m = student.masks[c];
    if (m.value().size() != 2 * per) {
      throw DimensionError("student mask " + shape_string(m.shape()) + " does not match teacher mask " +
                           shape_string(teacher_mask.shape()));
    }
    BasicTensor<Real> t(m.shape());
    std::copy_n(teacher_mask.re().begin() + c * per, per, t.raw());
    std::copy_n(teacher_mask.im().begin() + c * per, per, t.raw() + per);
    const Var<Real> s = square_sum(sub_const(m, t));
    const Var<Real> d = cosine_distance(m, t);
    sq = c == 0 ? s : add(sq, s);
    cos = c == 0 ? d : add(cos, d);
    elements += 2 * per;
  }
  const Var<Real> mse = scale(sq, 1.0 / double(elements));
  const Var<Real> cos_term = scale(cos, 1.0 / double(channels));
  const Var<Real> total = add(add(recon, scale(mse, w.lambda_mse)), scale(cos_term, w.lambda_cos));

  LossGraph<Real> out;
  out.total = total;
  out.parts.recon = recon.item();
  out.parts.distill_mse = mse.item();
  out.parts.distill_cos = cos_term.item();
  out.parts.total = total.item();
  return out;
}

template LossGraph<float> total_loss_graph(const model::SeparationGraph<float>&, const dsp::AudioBuffer&,
                                           const ComplexTensor&, const LossWeights&,
                                           std::span<const dsp::StftConfig>);
template LossGraph<double> total_loss_graph(const model::SeparationGraph<double>&, const dsp::AudioBuffer&,
                                            const ComplexTensor&, const LossWeights&,
                                            std::span<const dsp::StftConfig>);

}  // namespace wsa::losses
