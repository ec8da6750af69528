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

#include "cawa/rd_objective.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cawa/error.hpp"

namespace cawa {

std::string_view to_string(LambdaMode mode) {
  switch (mode) {
    case LambdaMode::kFixed: return "fixed";
    case LambdaMode::kAdaptive: return "adaptive";
    case LambdaMode::kHybrid: return "hybrid";
  }
  return "unknown";
}

LambdaMode parse_lambda_mode(std::string_view name) {
  if (name == "fixed") return LambdaMode::kFixed;
  if (name == "adaptive") return LambdaMode::kAdaptive;
  if (name == "hybrid") return LambdaMode::kHybrid;
  throw ContractError("unknown lambda mode '" + std::string(name) +
                      "' (expected fixed, adaptive or hybrid)");
}

void LambdaSchedule::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ContractError("lambda must be >= 0");
  if (!(lambda_bar >= 0.0) || !std::isfinite(lambda_bar))
    throw ContractError("lambda_bar must be >= 0");
  if (mode == LambdaMode::kHybrid && !(threshold > 0.0))
    throw ContractError("hybrid threshold must be > 0");
}

void ScheduleState::observe(double l_rgb, const LambdaSchedule& schedule) {
  window_.push_back(l_rgb);
  window_sum_ += l_rgb;
  if (static_cast<int>(window_.size()) > kHybridWindow) {
    window_sum_ -= window_.front();
    window_.pop_front();
  }
  if (switched_ || schedule.mode != LambdaMode::kHybrid) return;
  if (moving_average() < schedule.threshold) {
    if (++steps_below_ >= kHybridHysteresis) switched_ = true;
  } else {
    steps_below_ = 0;
  }
}

double ScheduleState::moving_average() const {
  if (window_.empty()) return std::numeric_limits<double>::infinity();
  return window_sum_ / static_cast<double>(window_.size());
}

double rgb_loss(std::span<const double> predicted, std::span<const double> target,
                std::span<double> grad) {
  if (predicted.size() != target.size() || predicted.empty())
    throw ContractError("rgb_loss: prediction/target shape mismatch");
  if (!grad.empty() && grad.size() != predicted.size())
    throw ContractError("rgb_loss: gradient buffer shape mismatch");
  const double inv_n = 1.0 / static_cast<double>(predicted.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - target[i];
    sum += e * e;
    if (!grad.empty()) grad[i] = 2.0 * e * inv_n;
  }
  return sum * inv_n;
}

double psnr(double mse) {
  if (mse < 0.0 || std::isnan(mse)) throw ContractError("psnr: mse must be >= 0");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

GlobalLoss global_loss(double l_rgb, double rate, const LambdaSchedule& schedule,
                       const ScheduleState& state) {
  GlobalLoss g;
  switch (schedule.mode) {
    case LambdaMode::kFixed:
      g.lambda_eff = schedule.lambda;
      g.loss = l_rgb + schedule.lambda * rate;
      g.d_rate = schedule.lambda;
      break;
    case LambdaMode::kAdaptive:
      g.lambda_eff = schedule.lambda_bar * l_rgb;
      g.loss = l_rgb * (1.0 + schedule.lambda_bar * rate);
      g.d_rgb = 1.0 + schedule.lambda_bar * rate;
      g.d_rate = schedule.lambda_bar * l_rgb;
      break;
    case LambdaMode::kHybrid:
      g.lambda_eff = state.switched() ? schedule.lambda : l_rgb;
      g.loss = l_rgb + g.lambda_eff * rate;
      g.d_rate = g.lambda_eff;
      break;
  }
  return g;
}

}  // namespace cawa
