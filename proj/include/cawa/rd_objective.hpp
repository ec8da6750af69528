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

#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string_view>

namespace cawa {

enum class LambdaMode : std::uint8_t { kFixed = 0, kAdaptive = 1, kHybrid = 2 };

std::string_view to_string(LambdaMode mode);
LambdaMode parse_lambda_mode(std::string_view name);

// How the rate term is weighted against distortion.
//   fixed:    L_rgb + lambda R
//   adaptive: L_rgb (1 + lambda_bar R)
//   hybrid:   L_rgb + lambda_eff R, lambda_eff = L_rgb (detached) until the
//             smoothed RGB loss settles below `threshold`, lambda afterwards.
struct LambdaSchedule {
  LambdaMode mode = LambdaMode::kFixed;
  double lambda = 0.0;
  double lambda_bar = 1.0;
  double threshold = 0.0009;

  void validate() const;
};

inline constexpr int kHybridWindow = 100;
inline constexpr int kHybridHysteresis = 100;

// Trainer-owned state for the hybrid switch.
class ScheduleState {
 public:
  // Records this step's RGB loss (call after evaluating the step).
  void observe(double l_rgb, const LambdaSchedule& schedule);

  bool switched() const { return switched_; }
  double moving_average() const;
  std::int64_t steps_below() const { return steps_below_; }

 private:
  std::deque<double> window_;
  double window_sum_ = 0.0;
  std::int64_t steps_below_ = 0;
  bool switched_ = false;
};

// Mean squared error per channel; grad (if non-empty) receives dL/dpred.
double rgb_loss(std::span<const double> predicted, std::span<const double> target,
                std::span<double> grad);

// 10 log10(1 / mse); +infinity for mse == 0.
double psnr(double mse);

struct GlobalLoss {
  double loss = 0.0;
  double lambda_eff = 0.0;
  double d_rgb = 1.0;   // d loss / d L_rgb
  double d_rate = 0.0;  // d loss / d R
};

GlobalLoss global_loss(double l_rgb, double rate, const LambdaSchedule& schedule,
                       const ScheduleState& state);

}  // namespace cawa
