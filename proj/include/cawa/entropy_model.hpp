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
#include <span>
#include <string_view>

#include "cawa/rng.hpp"

namespace cawa {

enum class DistributionKind : std::uint8_t { kLaplace = 0, kCauchy = 1 };
enum class Quantizer : std::uint8_t { kMidRise = 0, kMidTread = 1 };

std::string_view to_string(DistributionKind kind);
std::string_view to_string(Quantizer quantizer);
DistributionKind parse_distribution(std::string_view name);
Quantizer parse_quantizer(std::string_view name);

// ln(1 + e^x) and its inverse; maps the unconstrained scale parameter to b > 0.
double softplus(double x);
double softplus_inverse(double y);

// Learned global entropy model: location mu and scale b = softplus(b_raw).
// For Laplace b is the standard scale parameter (variance 2b^2); for Cauchy
// it is the half-width, which equals the median absolute deviation.
struct DistributionParams {
  DistributionKind kind = DistributionKind::kLaplace;
  double mu = 0.0;
  double b_raw = 0.0;

  double scale() const { return softplus(b_raw); }
  // Rounds mu and b_raw to float.
  void round_to_storage();
  static DistributionParams from_scale(DistributionKind kind, double mu,
                                       double scale);
};

struct QuantSpec {
  double delta = 0.15;
  Quantizer quantizer = Quantizer::kMidTread;

  // Laplace models pair with the mid-rise grid, Cauchy with mid-tread.
  static QuantSpec default_for(DistributionKind kind, double delta);
  void validate() const;
};

double cdf(const DistributionParams& params, double x);
double pdf(const DistributionParams& params, double x);

inline constexpr double kMassFloor = 0x1.0p-40;

// Probability of the width-delta bin centred at v, floored at 2^-40.
double bin_mass(const DistributionParams& params, double v, double delta);

struct RateResult {
  double bits_per_feature = 0.0;
  double grad_mu = 0.0;
  double grad_b_raw = 0.0;
};

// Mean self-information (bits) of features + noise under the bin model.
// noise may be empty (evaluate exactly at the given values) or hold one
// offset per feature. When grad_features is non-empty it receives
// d(bits_per_feature)/d(feature), overwriting its contents.
RateResult rate_loss(std::span<const double> features,
                     std::span<const double> noise,
                     const DistributionParams& params, double delta,
                     std::span<double> grad_features);

// Draws fresh U[-delta/2, delta/2] noise from rng and evaluates rate_loss.
RateResult rate_loss(std::span<const double> features,
                     const DistributionParams& params, double delta, Rng& rng,
                     std::span<double> grad_features);

// Fills noise with i.i.d. U[-delta/2, delta/2] draws.
void draw_uniform_noise(std::span<double> noise, double delta, Rng& rng);

// y_hat = y + U[-delta/2, delta/2], in place.
void inject_noise(std::span<double> y, double delta, Rng& rng);

struct QuantizedValue {
  std::int64_t index = 0;
  double value = 0.0;
};

// mid-rise: k = ceil(x / delta), value = delta (k - 1/2)
// mid-tread: k = floor(x / delta + 1/2), value = delta k
QuantizedValue quantize(double x, const QuantSpec& quant);

// Reconstruction of index k in 32-bit storage, computed from the step as it
// is stored in the container (f32). Both the in-memory and the import path
// go through this function, which makes them agree bit for bit.
float dequantize(std::int64_t index, float delta, Quantizer quantizer);

}  // namespace cawa
