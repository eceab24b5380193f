// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wsa/losses/losses.hpp"

namespace wsa::losses {

// ---- synthetic training data ---------------------------------------------

struct Mixture {
  dsp::AudioBuffer mix;
  dsp::AudioBuffer target;
};

// target = random harmonic chords plus short enveloped noise bursts;
// interference = low-passed noise. Deterministic per seed.
Mixture synth_mixture(double sample_rate, std::size_t length, std::uint64_t seed, std::size_t channels = 1);

// ---- gradients -----------------------------------------------------------

// Builds the loss through the binder, so that every parameter the loss reads
// is bound from the tensors listed in `params`.
template <class Real>
using LossFn = std::function<autograd::Var<Real>(autograd::ParamBinder<Real>&)>;

template <class Real>
struct Gradients {
  double loss = 0;
  std::vector<BasicTensor<Real>> grads;  // aligned with params
};

// Reverse-mode gradients of fn with respect to each tensor in params. Throws
// NumericError on a non-finite loss.
template <class Real>
Gradients<Real> grad(const LossFn<Real>& fn, const std::vector<BasicTensor<Real>*>& params);

struct FiniteDiffReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates with |numeric| < 1e-8
  std::string worst;        // "tensor index[coordinate]" of the largest error
};

// Central differences (f(x + eps) - f(x - eps)) / 2 eps on `samples` random
// coordinates; relative error |analytic - numeric| / max(1e-6, |numeric|).
// Parameters are restored afterwards.
template <class Real>
FiniteDiffReport finite_diff_check(const LossFn<Real>& fn, const std::vector<BasicTensor<Real>*>& params,
                                   double eps = 1e-3, std::size_t samples = 50, std::uint64_t seed = 0);

// Gradient check of L_total on a small model (4 bands, d_model 16, 1 block):
// a WSA student with random sinks against its full-attention teacher on a
// synthetic mixture. f64 runs the same check on a double-precision copy of
// the student. The default f64 step, 5e-6, sits between loss roundoff (which
// dominates below ~1e-6) and crossings of the L1 kinks (above ~1e-5).
struct GradcheckOptions {
  std::uint64_t seed = 0;
  bool f64 = false;
  std::size_t samples = 50;
  double eps = 0;  // 0: 1e-3 in f32, 5e-6 in f64
};

model::ModelConfig gradcheck_model_config();
FiniteDiffReport gradcheck_toy(const GradcheckOptions& opts);

// ---- optimization --------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig cfg);
  void step(const std::vector<Tensor>& grads);
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct DistillConfig {
  std::size_t steps = 500;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double clip_seconds = 0.5;
  LossWeights weights{};
};

// Adam on L_total: per step a fresh synthetic mixture, the teacher's mask as
// the distillation target, and the student's separation of the mix against
// the clean target. The student is updated in place. Throws NumericError
// naming the step on a non-finite loss.
std::vector<LossBreakdown> distill_loop(const model::SepModel& teacher, model::SepModel& student,
                                        const DistillConfig& cfg);

// Desk-scale demo model: 8 bands, d_model 32, 4 heads x 8, 1 block, 16 kHz.
model::ModelConfig distill_demo_config();

// The demo: a full-attention teacher is first fitted to the separation task
// alone (lambda = 0) so its masks are worth imitating, then a freshly
// initialized WSA student of the same geometry is distilled from it.
struct DistillDemoConfig {
  std::size_t steps = 500;
  std::size_t pretrain_steps = 300;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  attention::WsaConfig wsa{10, 8};
};

struct DistillDemoResult {
  std::vector<LossBreakdown> pretrain;  // teacher fitting, recon only
  std::vector<LossBreakdown> history;   // student distillation
  double ratio = 0;                     // distill_ratio(history, defaults, 50)
};

DistillDemoResult distill_demo(const DistillDemoConfig& cfg);

// Mean distill loss (lambda-weighted) of the last `window` steps over that of
// the first `window` steps.
double distill_ratio(const std::vector<LossBreakdown>& history, const LossWeights& w, std::size_t window = 50);

}  // namespace wsa::losses
