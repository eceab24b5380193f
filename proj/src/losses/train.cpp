// SPDX-License-Identifier: Apache-2.0

#include "wsa/losses/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wsa/core/rng.hpp"

namespace wsa::losses {

using autograd::ParamBinder;
using autograd::Var;

Mixture synth_mixture(double sample_rate, std::size_t length, std::uint64_t seed, std::size_t channels) {
  Rng rng(seed);
  struct Partial {
    double freq, amp, phase;
  };
  std::vector<Partial> partials;
  const std::size_t notes = 2 + rng.index(3);
  for (std::size_t n = 0; n < notes; ++n) {
    const double f0 = 110.0 * std::pow(2.0, double(rng.index(36)) / 12.0);
    const double amp = rng.uniform(0.08, 0.2);
    for (int h = 1; h <= 4; ++h) {
      if (f0 * h < 0.45 * sample_rate) partials.push_back({f0 * h, amp / h, rng.uniform(0, 2 * std::numbers::pi)});
    }
  }
  struct Burst {
    std::size_t start, len;
  };
  std::vector<Burst> bursts;
  const std::size_t burst_len = std::max<std::size_t>(1, static_cast<std::size_t>(0.04 * sample_rate));
  for (int b = 0; b < 2; ++b) bursts.push_back({rng.index(std::max<std::size_t>(length, 1)), burst_len});
  const double alpha = rng.uniform(0.85, 0.97);

  Mixture out;
  out.mix.sample_rate = out.target.sample_rate = sample_rate;
  for (std::size_t c = 0; c < channels; ++c) {
    const double gain = rng.uniform(0.7, 1.0);
    std::vector<float> target(length), mix(length);
    for (std::size_t i = 0; i < length; ++i) {
      double s = 0;
      const double t = double(i) / sample_rate;
      for (const auto& p : partials) s += p.amp * std::sin(2 * std::numbers::pi * p.freq * t + p.phase);
      target[i] = static_cast<float>(gain * s);
    }
    for (const auto& b : bursts) {
      for (std::size_t k = 0; k < b.len && b.start + k < length; ++k) {
        const double env = std::sin(std::numbers::pi * double(k) / double(b.len));
        target[b.start + k] += static_cast<float>(0.1 * env * env * rng.normal());
      }
    }
    double lp = 0;
    for (std::size_t i = 0; i < length; ++i) {
      lp = alpha * lp + (1 - alpha) * rng.normal();
      mix[i] = target[i] + static_cast<float>(1.5 * lp);
    }
    out.target.samples.push_back(std::move(target));
    out.mix.samples.push_back(std::move(mix));
  }
  return out;
}

template <class Real>
Gradients<Real> grad(const LossFn<Real>& fn, const std::vector<BasicTensor<Real>*>& params) {
  ParamBinder<Real> bind(true);
  for (auto* p : params) bind(*p);
  const Var<Real> loss = fn(bind);
  autograd::backward(loss);
  Gradients<Real> out;
  out.loss = loss.item();
  for (auto* p : params) out.grads.push_back(bind.grad(*p));
  return out;
}

template <class Real>
FiniteDiffReport finite_diff_check(const LossFn<Real>& fn, const std::vector<BasicTensor<Real>*>& params,
                                   double eps, std::size_t samples, std::uint64_t seed) {
  const Gradients<Real> analytic = grad(fn, params);
  auto eval = [&] {
    ParamBinder<Real> bind(false);
    return fn(bind).item();
  };
  std::size_t total = 0;
  for (auto* p : params) total += p->size();

  FiniteDiffReport report;
  if (total == 0) return report;
  Rng rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = rng.index(total), k = 0;
    while (flat >= params[k]->size()) flat -= params[k++]->size();
    Real& x = (*params[k])[flat];
    const Real original = x;
    x = static_cast<Real>(original + eps);
    const double up = x;
    const double f_up = eval();
    x = static_cast<Real>(original - eps);
    const double down = x;
    const double f_down = eval();
    x = original;

    // Divide by the step actually taken after rounding to Real.
    const double numeric = (f_up - f_down) / (up - down);
    if (std::abs(numeric) < 1e-8) {
      ++report.skipped;
      continue;
    }
    ++report.checked;
    const double rel = std::abs(double(analytic.grads[k][flat]) - numeric) / std::max(1e-6, std::abs(numeric));
    if (report.worst.empty() || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = "tensor " + std::to_string(k) + "[" + std::to_string(flat) + "]";
    }
  }
  return report;
}

model::ModelConfig gradcheck_model_config() {
  model::ModelConfig cfg;
  cfg.num_bands = 4;
  cfg.model_dim = 16;
  cfg.heads = 2;
  cfg.head_dim = 8;
  cfg.blocks = 1;
  return cfg;
}

namespace {

template <class Real>
FiniteDiffReport check_student(model::BasicSepModel<Real>& student, const Mixture& data,
                               const ComplexTensor& teacher_mask, double eps, const GradcheckOptions& opts) {
  const auto resolutions = dsp::loss_resolutions(data.mix.sample_rate);
  std::vector<BasicTensor<Real>*> params;
  for (auto& [name, t] : student.parameters()) params.push_back(t);
  const LossFn<Real> fn = [&](ParamBinder<Real>& bind) {
    const auto graph = model::separate_graph(student, bind, data.mix);
    return total_loss_graph(graph, data.target, teacher_mask, LossWeights{}, resolutions).total;
  };
  return finite_diff_check<Real>(fn, params, eps, opts.samples, opts.seed);
}

}  // namespace

FiniteDiffReport gradcheck_toy(const GradcheckOptions& opts) {
  const auto cfg = gradcheck_model_config();
  const model::SepModel teacher = model::init_toy_model(cfg, opts.seed);
  const Mixture data = synth_mixture(cfg.stft.sample_rate, 4000, opts.seed ^ 0x9e3779b97f4a7c15ULL);
  const ComplexTensor teacher_mask = model::separate(teacher, data.mix).mask;

  model::SepModel student = model::convert_to_wsa(teacher, {4, 2});
  Rng rng(opts.seed + 1);
  for (auto& block : student.blocks) {
    for (auto& v : block.time.sink_kqv.data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  }
  if (opts.f64) {
    auto student64 = student.cast<double>();
    return check_student(student64, data, teacher_mask, opts.eps > 0 ? opts.eps : 5e-6, opts);
  }
  return check_student(student, data, teacher_mask, opts.eps > 0 ? opts.eps : 1e-3, opts);
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size()) throw DimensionError("Adam: gradient count does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    if (grads[k].shape() != p.shape()) {
      throw DimensionError("Adam: gradient " + shape_string(grads[k].shape()) + " for parameter " +
                           shape_string(p.shape()));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grads[k][i];
      m_[k][i] = cfg_.beta1 * m_[k][i] + (1 - cfg_.beta1) * g;
      v_[k][i] = cfg_.beta2 * v_[k][i] + (1 - cfg_.beta2) * g * g;
      const double mhat = m_[k][i] / c1;
      const double vhat = v_[k][i] / c2;
      p[i] = static_cast<float>(p[i] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

std::vector<LossBreakdown> distill_loop(const model::SepModel& teacher, model::SepModel& student,
                                        const DistillConfig& cfg) {
  cfg.weights.validate();
  if (teacher.config.stft != student.config.stft || teacher.bands != student.bands) {
    throw ConfigError("teacher and student must share the STFT and band geometry");
  }
  const double sr = student.config.stft.sample_rate;
  const auto length = static_cast<std::size_t>(std::llround(cfg.clip_seconds * sr));
  if (length == 0) throw ConfigError("clip_seconds too short");
  const auto resolutions = dsp::loss_resolutions(sr);

  std::vector<Tensor*> params;
  for (auto& [name, t] : student.parameters()) params.push_back(t);
  Adam adam(params, AdamConfig{cfg.lr});

  Rng seeds(cfg.seed);
  std::vector<LossBreakdown> history;
  history.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Mixture data = synth_mixture(sr, length, seeds.next_u64());
    const ComplexTensor teacher_mask = model::separate(teacher, data.mix).mask;

    ParamBinder<float> bind(true);
    LossGraph<float> loss;
    try {
      const auto graph = model::separate_graph(student, bind, data.mix);
      loss = total_loss_graph(graph, data.target, teacher_mask, cfg.weights, resolutions);
    } catch (const NumericError& e) {
      // Diverged parameters usually surface inside the forward pass first.
      throw NumericError("non-finite loss at step " + std::to_string(step) + ": " + e.what());
    }
    if (!std::isfinite(loss.parts.total)) {
      throw NumericError("non-finite loss at step " + std::to_string(step));
    }
    autograd::backward(loss.total);
    std::vector<Tensor> grads;
    for (auto* p : params) grads.push_back(bind.grad(*p));
    adam.step(grads);
    history.push_back(loss.parts);
  }
  return history;
}

model::ModelConfig distill_demo_config() {
  model::ModelConfig cfg;
  cfg.num_bands = 8;
  cfg.model_dim = 32;
  cfg.heads = 4;
  cfg.head_dim = 8;
  cfg.blocks = 1;
  return cfg;
}

DistillDemoResult distill_demo(const DistillDemoConfig& cfg) {
  const auto model_cfg = distill_demo_config();
  DistillDemoResult out;
  model::SepModel teacher = model::init_toy_model(model_cfg, cfg.seed);
  if (cfg.pretrain_steps > 0) {
    DistillConfig fit;
    fit.steps = cfg.pretrain_steps;
    fit.lr = cfg.lr;
    fit.seed = cfg.seed + 1000;
    fit.weights = {0.0, 0.0};
    const model::SepModel frozen = teacher;  // only feeds the (zero-weighted) distill terms
    out.pretrain = distill_loop(frozen, teacher, fit);
  }
  model::SepModel student = model::convert_to_wsa(model::init_toy_model(model_cfg, cfg.seed + 1), cfg.wsa);
  DistillConfig dc;
  dc.steps = cfg.steps;
  dc.lr = cfg.lr;
  dc.seed = cfg.seed;
  out.history = distill_loop(teacher, student, dc);
  out.ratio = distill_ratio(out.history, dc.weights, std::min<std::size_t>(50, out.history.size()));
  return out;
}

double distill_ratio(const std::vector<LossBreakdown>& history, const LossWeights& w, std::size_t window) {
  if (window == 0 || history.size() < window) {
    throw ConfigError("need at least " + std::to_string(window) + " steps for the distill ratio");
  }
  double first = 0, last = 0;
  for (std::size_t i = 0; i < window; ++i) {
    first += history[i].distill(w);
    last += history[history.size() - window + i].distill(w);
  }
  if (first == 0) return last == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return last / first;
}

template Gradients<float> grad(const LossFn<float>&, const std::vector<Tensor*>&);
template Gradients<double> grad(const LossFn<double>&, const std::vector<BasicTensor<double>*>&);
template FiniteDiffReport finite_diff_check(const LossFn<float>&, const std::vector<Tensor*>&, double,
                                            std::size_t, std::uint64_t);
template FiniteDiffReport finite_diff_check(const LossFn<double>&, const std::vector<BasicTensor<double>*>&,
                                            double, std::size_t, std::uint64_t);

}  // namespace wsa::losses
