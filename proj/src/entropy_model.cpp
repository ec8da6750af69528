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

#include "cawa/entropy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cawa/error.hpp"

namespace cawa {

std::string_view to_string(DistributionKind kind) {
  return kind == DistributionKind::kLaplace ? "laplace" : "cauchy";
}

std::string_view to_string(Quantizer quantizer) {
  return quantizer == Quantizer::kMidRise ? "mid_rise" : "mid_tread";
}

DistributionKind parse_distribution(std::string_view name) {
  if (name == "laplace") return DistributionKind::kLaplace;
  if (name == "cauchy") return DistributionKind::kCauchy;
  throw ContractError("unknown distribution '" + std::string(name) +
                      "' (expected laplace or cauchy)");
}

Quantizer parse_quantizer(std::string_view name) {
  if (name == "mid_rise" || name == "mid-rise") return Quantizer::kMidRise;
  if (name == "mid_tread" || name == "mid-tread") return Quantizer::kMidTread;
  throw ContractError("unknown quantizer '" + std::string(name) +
                      "' (expected mid_rise or mid_tread)");
}

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw InputDomainError("softplus_inverse needs y > 0");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

void DistributionParams::round_to_storage() {
  mu = static_cast<float>(mu);
  b_raw = static_cast<float>(b_raw);
}

DistributionParams DistributionParams::from_scale(DistributionKind kind,
                                                  double mu, double scale) {
  return {kind, mu, softplus_inverse(scale)};
}

QuantSpec QuantSpec::default_for(DistributionKind kind, double delta) {
  return {delta, kind == DistributionKind::kLaplace ? Quantizer::kMidRise
                                                    : Quantizer::kMidTread};
}

void QuantSpec::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw ContractError("quantization step must be finite and > 0");
}

namespace {

constexpr double kInvLn2 = 1.0 / std::numbers::ln2;

// CDF in standardized units. The lower branch avoids cancellation so that
// far-left tail probabilities keep full relative precision.
double standard_cdf(DistributionKind kind, double z) {
  if (kind == DistributionKind::kLaplace)
    return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
  return z < 0.0 ? std::atan(-1.0 / z) * std::numbers::inv_pi
                 : 0.5 + std::atan(z) * std::numbers::inv_pi;
}

double standard_pdf(DistributionKind kind, double z) {
  if (kind == DistributionKind::kLaplace) return 0.5 * std::exp(-std::abs(z));
  return std::numbers::inv_pi / (1.0 + z * z);
}

// Bin mass without the floor. Both distributions are symmetric about mu, so
// the bin is reflected onto the left half before differencing.
double raw_mass(DistributionKind kind, double mu, double b, double v, double half) {
  const double left = mu - std::abs(v - mu);
  return standard_cdf(kind, (left + half - mu) / b) -
         standard_cdf(kind, (left - half - mu) / b);
}

}  // namespace

double cdf(const DistributionParams& params, double x) {
  return standard_cdf(params.kind, (x - params.mu) / params.scale());
}

double pdf(const DistributionParams& params, double x) {
  const double b = params.scale();
  return standard_pdf(params.kind, (x - params.mu) / b) / b;
}

double bin_mass(const DistributionParams& params, double v, double delta) {
  const double m =
      raw_mass(params.kind, params.mu, params.scale(), v, 0.5 * delta);
  return std::max(m, kMassFloor);
}

RateResult rate_loss(std::span<const double> features,
                     std::span<const double> noise,
                     const DistributionParams& params, double delta,
                     std::span<double> grad_features) {
  if (!noise.empty() && noise.size() != features.size())
    throw ContractError("rate_loss: noise length differs from feature count");
  if (!grad_features.empty() && grad_features.size() != features.size())
    throw ContractError("rate_loss: gradient length differs from feature count");
  RateResult result;
  if (features.empty()) return result;

  const DistributionKind kind = params.kind;
  const double mu = params.mu;
  const double b = params.scale();
  const double inv_b = 1.0 / b;
  const double half = 0.5 * delta;
  const bool want_grad = !grad_features.empty();
  const double inv_n = 1.0 / static_cast<double>(features.size());

  double bits = 0.0;
  double d_mu = 0.0;
  double d_b = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double v = noise.empty() ? features[i] : features[i] + noise[i];
    const double m = raw_mass(kind, mu, b, v, half);
    if (m <= kMassFloor) {
      bits += 40.0;
      if (want_grad) grad_features[i] = 0.0;
      continue;
    }
    bits -= std::log2(m);
    if (!want_grad) continue;
    const double z_hi = (v + half - mu) * inv_b;
    const double z_lo = (v - half - mu) * inv_b;
    const double p_hi = standard_pdf(kind, z_hi) * inv_b;
    const double p_lo = standard_pdf(kind, z_lo) * inv_b;
    // d(-log2 m) = -dm / (m ln 2)
    const double scale = -kInvLn2 / m;
    const double dm_dv = p_hi - p_lo;
    grad_features[i] = scale * dm_dv * inv_n;
    d_mu -= scale * dm_dv;
    d_b += scale * (p_lo * z_lo - p_hi * z_hi);
  }
  result.bits_per_feature = bits * inv_n;
  if (want_grad) {
    // db/db_raw = sigmoid(b_raw)
    const double sig = 1.0 / (1.0 + std::exp(-params.b_raw));
    result.grad_mu = d_mu * inv_n;
    result.grad_b_raw = d_b * inv_n * sig;
  }
  return result;
}

void draw_uniform_noise(std::span<double> noise, double delta, Rng& rng) {
  const double half = 0.5 * delta;
  for (double& n : noise) n = rng.uniform(-half, half);
}

RateResult rate_loss(std::span<const double> features,
                     const DistributionParams& params, double delta, Rng& rng,
                     std::span<double> grad_features) {
  std::vector<double> noise(features.size());
  draw_uniform_noise(noise, delta, rng);
  return rate_loss(features, noise, params, delta, grad_features);
}

void inject_noise(std::span<double> y, double delta, Rng& rng) {
  const double half = 0.5 * delta;
  for (double& v : y) v += rng.uniform(-half, half);
}

QuantizedValue quantize(double x, const QuantSpec& quant) {
  if (!std::isfinite(x)) throw InputDomainError("quantize: non-finite value");
  quant.validate();
  const double delta = quant.delta;
  if (std::abs(x / delta) > 0x1.0p62)
    throw InputDomainError("quantize: value too large for a 64-bit index");
  QuantizedValue q;
  if (quant.quantizer == Quantizer::kMidRise) {
    q.index = static_cast<std::int64_t>(std::ceil(x / delta));
    q.value = delta * (static_cast<double>(q.index) - 0.5);
  } else {
    q.index = static_cast<std::int64_t>(std::floor(x / delta + 0.5));
    q.value = delta * static_cast<double>(q.index);
  }
  return q;
}

float dequantize(std::int64_t index, float delta, Quantizer quantizer) {
  const double k = static_cast<double>(index);
  const double level = quantizer == Quantizer::kMidRise ? k - 0.5 : k;
  return static_cast<float>(static_cast<double>(delta) * level);
}

}  // namespace cawa
