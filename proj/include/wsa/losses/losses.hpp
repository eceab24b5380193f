// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "wsa/autograd/var.hpp"
#include "wsa/dsp/audio.hpp"
#include "wsa/dsp/stft.hpp"
#include "wsa/model/model.hpp"

namespace wsa::losses {

struct LossWeights {
  double lambda_mse = 1.0;
  double lambda_cos = 1.0;
  void validate() const;  // both >= 0
};

struct LossBreakdown {
  double recon = 0;
  double distill_mse = 0;
  double distill_cos = 0;
  double total = 0;  // recon + lambda_mse * distill_mse + lambda_cos * distill_cos

  double distill(const LossWeights& w) const { return w.lambda_mse * distill_mse + w.lambda_cos * distill_cos; }
};

struct DistillTerms {
  double mse = 0;       // mean squared difference over (re, im) elements
  double cos_term = 0;  // 1 - cos on real-flattened masks, averaged over channels
};

// Mean |est - target| over all samples plus, per STFT resolution, the mean of
// |re| and |im| differences over all spectrogram elements. Throws
// DimensionError on a length or channel mismatch.
double recon_loss(const dsp::AudioBuffer& est, const dsp::AudioBuffer& target,
                  std::span<const dsp::StftConfig> resolutions);

// Masks are [C x F x T]; each channel is one example for the cosine term.
// Throws DimensionError on a shape mismatch and NumericError when both masks
// of a channel are all zero (cosine undefined).
DistillTerms mask_distill_loss(const ComplexTensor& student, const ComplexTensor& teacher);

LossBreakdown total_loss(const model::Separation& student, const dsp::AudioBuffer& target,
                         const ComplexTensor& teacher_mask, const LossWeights& w,
                         std::span<const dsp::StftConfig> resolutions);

// Differentiable form of total_loss over a student's separation graph.
template <class Real>
struct LossGraph {
  autograd::Var<Real> total;
  LossBreakdown parts;
};

template <class Real>
LossGraph<Real> total_loss_graph(const model::SeparationGraph<Real>& student, const dsp::AudioBuffer& target,
                                 const ComplexTensor& teacher_mask, const LossWeights& w,
                                 std::span<const dsp::StftConfig> resolutions);

}  // namespace wsa::losses
