// Copyright 2026 The cawa-field Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Training loop.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "cawa/error.hpp"
#include "cawa/rng.hpp"
#include "cawa/trainer.hpp"

namespace cawa {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void scale(std::span<double> xs, double c) {
  for (double& x : xs) x *= c;
}

bool all_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

Trainer::Trainer(TrainConfig config, const Task& task)
    : config_(std::move(config)), task_(task), model_(init_model(config_)) {
  if (task_.kind() != config_.task)
    throw ContractError("trainer: config task does not match the supplied task");
  task_.check_model(model_);
}

StepMetrics Trainer::evaluate(const FieldModel& model, std::int64_t step,
                              ModelGradients* grads) const {
  if (grads) grads->zero();
  StepMetrics m;
  m.step = step;

  RateResult rate;
  std::vector<double> rate_grad;
  if (config_.rate_enabled) {
    Rng rng(config_.seed, Stream::kRateNoise, static_cast<std::uint64_t>(step));
    if (grads) rate_grad.resize(model.features.size());
    rate = rate_loss(model.features.values(), model.distribution, config_.delta, rng, rate_grad);
  }

  const double l_rgb = task_.distortion(model, config_, step, grads);
  const GlobalLoss g = global_loss(l_rgb, rate.bits_per_feature, config_.schedule, schedule_state_);

  if (grads) {
    if (g.d_rgb != 1.0) {
      scale(grads->features.values(), g.d_rgb);
      scale(grads->head, g.d_rgb);
      scale(grads->color, g.d_rgb);
    }
    // A zero rate weight leaves the gradient untouched, so lambda = 0
    // reproduces a rate-free run exactly.
    if (config_.rate_enabled && g.d_rate != 0.0) {
      auto f = grads->features.values();
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += g.d_rate * rate_grad[i];
      grads->mu = g.d_rate * rate.grad_mu;
      grads->b_raw = g.d_rate * rate.grad_b_raw;
    }
  }

  m.l_rgb = l_rgb;
  m.rate_bits = rate.bits_per_feature;
  m.lambda_eff = g.lambda_eff;
  m.loss = g.loss;
  m.psnr = std::isfinite(l_rgb) ? psnr(l_rgb) : l_rgb;
  return m;
}

StepMetrics Trainer::train_step() {
  const auto start = std::chrono::steady_clock::now();
  const std::int64_t step = optimizer_.step + 1;
  ModelGradients grads(model_);
  StepMetrics m = evaluate(model_, step, &grads);

  if (!std::isfinite(m.loss) || !all_finite(grads.features.values()) || !all_finite(grads.head) ||
      !all_finite(grads.color)) {
    std::ostringstream msg;
    msg << "non-finite loss or gradient at step " << step << ": l_rgb=" << m.l_rgb
        << " rate_bits=" << m.rate_bits << " lambda_eff=" << m.lambda_eff
        << " loss=" << m.loss << " mu=" << model_.distribution.mu
        << " b=" << model_.distribution.scale();
    throw NumericError(msg.str());
  }

  AdamHyper hyper{config_.lr_features, config_.beta1, config_.beta2, config_.eps};
  adam_update(model_.features.values(), grads.features.values(), optimizer_.features, step, hyper);
  hyper.lr = config_.lr_mlp;
  adam_update(model_.head.params(), grads.head, optimizer_.head, step, hyper);
  if (model_.color) adam_update(model_.color->params(), grads.color, optimizer_.color, step, hyper);
  if (config_.rate_enabled) {
    hyper.lr = config_.lr_distribution;
    double dist[2] = {model_.distribution.mu, model_.distribution.b_raw};
    const double grad[2] = {grads.mu, grads.b_raw};
    adam_update(dist, grad, optimizer_.distribution, step, hyper);
    model_.distribution.mu = dist[0];
    model_.distribution.b_raw = dist[1];
  }

  optimizer_.step = step;
  schedule_state_.observe(m.l_rgb, config_.schedule);
  elapsed_ += seconds_since(start);
  m.seconds = elapsed_;
  history_.push_back(m);
  return m;
}

TrainResult train(const Task& task, const TrainConfig& config, const ProgressFn& progress) {
  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(config, task);
  for (std::int64_t i = 0; i < config.iterations; ++i) {
    const StepMetrics& m = trainer.train_step();
    if (progress && (m.step % config.metrics_every == 0 || m.step == config.iterations))
      progress(m);
  }
  TrainResult result;
  result.model = trainer.model();
  result.model.round_to_storage();
  result.history = trainer.history();
  result.final_psnr = task.evaluate_psnr(result.model);
  result.seconds = seconds_since(start);
  return result;
}

void write_metrics_csv(const std::vector<StepMetrics>& history, int every, std::ostream& out) {
  if (every < 1) throw ContractError("metrics interval must be >= 1");
  out << "step,l_rgb,rate_bits,lambda_eff,loss,psnr\n";
  char line[256];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const StepMetrics& m = history[i];
    if (m.step % every != 0 && i + 1 != history.size()) continue;
    std::snprintf(line, sizeof line, "%lld,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  static_cast<long long>(m.step), m.l_rgb, m.rate_bits, m.lambda_eff, m.loss,
                  m.psnr);
    out << line;
  }
}

}  // namespace cawa
