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

#include "cawa/nets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cawa/error.hpp"
#include "cawa/rng.hpp"

namespace cawa {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kExpClamped: return "exp_clamped";
  }
  return "unknown";
}

double exp_clamped(double t) {
  return std::exp(std::clamp(t, -kExpClampLimit, kExpClampLimit));
}

void MlpSpec::validate() const {
  if (input < 1 || hidden < 1 || output < 1 || hidden_layers < 0)
    throw ContractError("MLP widths must be >= 1");
  if (output_activation != Activation::kIdentity &&
      output_activation != Activation::kSigmoid &&
      output_activation != Activation::kExpClamped)
    throw ContractError("unknown MLP output activation");
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l)
    n += static_cast<std::size_t>(layer_output(l)) * (layer_input(l) + 1);
  return n;
}

Mlp::Mlp(const MlpSpec& spec) : spec_(spec) {
  spec.validate();
  std::size_t offset = 0;
  for (int l = 0; l < spec.layer_count(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(spec.layer_output(l)) *
              (spec.layer_input(l) + 1);
  }
  params_.assign(offset, 0.0);
}

std::size_t Mlp::bias_offset(int layer) const {
  return offsets_[layer] +
         static_cast<std::size_t>(spec_.layer_output(layer)) *
             spec_.layer_input(layer);
}

Mlp::ConstMatrixMap Mlp::weight(int layer) const {
  return {params_.data() + offsets_[layer], spec_.layer_output(layer),
          spec_.layer_input(layer)};
}

Mlp::MatrixMap Mlp::weight(int layer) {
  return {params_.data() + offsets_[layer], spec_.layer_output(layer),
          spec_.layer_input(layer)};
}

Mlp::ConstVectorMap Mlp::bias(int layer) const {
  return {params_.data() + bias_offset(layer), spec_.layer_output(layer)};
}

Mlp::VectorMap Mlp::bias(int layer) {
  return {params_.data() + bias_offset(layer), spec_.layer_output(layer)};
}

Mlp init_mlp(const MlpSpec& spec, std::uint64_t seed, std::uint64_t salt) {
  Mlp mlp(spec);
  Rng rng(seed, static_cast<std::uint64_t>(Stream::kMlpInit), salt);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const double limit = std::sqrt(6.0 / spec.layer_input(l));
    auto w = mlp.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
  }
  return mlp;
}

void mlp_forward(const Mlp& mlp, const Eigen::Ref<const Eigen::MatrixXd>& input,
                 MlpTrace& trace) {
  const MlpSpec& spec = mlp.spec();
  if (input.rows() != spec.input)
    throw ContractError("mlp_forward: input has " + std::to_string(input.rows()) +
                        " rows, expected " + std::to_string(spec.input));
  const int layers = spec.layer_count();
  trace.layer_inputs.resize(layers);
  trace.layer_inputs[0] = input;
  for (int l = 0; l < layers - 1; ++l) {
    Eigen::MatrixXd& next = trace.layer_inputs[l + 1];
    next.noalias() = mlp.weight(l) * trace.layer_inputs[l];
    next.colwise() += mlp.bias(l);
    next = next.cwiseMax(0.0);
  }
  trace.pre_output.noalias() = mlp.weight(layers - 1) * trace.layer_inputs[layers - 1];
  trace.pre_output.colwise() += mlp.bias(layers - 1);
  switch (spec.output_activation) {
    case Activation::kIdentity:
      trace.output = trace.pre_output;
      break;
    case Activation::kSigmoid:
      trace.output = trace.pre_output.unaryExpr(
          [](double t) { return 1.0 / (1.0 + std::exp(-t)); });
      break;
    case Activation::kExpClamped:
      trace.output = trace.pre_output.unaryExpr([](double t) { return exp_clamped(t); });
      break;
  }
}

std::vector<double> mlp_forward(const Mlp& mlp, std::span<const double> x) {
  MlpTrace trace;
  mlp_forward(mlp,
              Eigen::Map<const Eigen::MatrixXd>(x.data(), static_cast<Eigen::Index>(x.size()), 1),
              trace);
  return {trace.output.data(), trace.output.data() + trace.output.size()};
}

void mlp_backward(const Mlp& mlp, const MlpTrace& trace,
                  const Eigen::Ref<const Eigen::MatrixXd>& grad_output,
                  std::span<double> grad_params, Eigen::MatrixXd* grad_input) {
  const MlpSpec& spec = mlp.spec();
  const int layers = spec.layer_count();
  if (grad_params.size() != spec.parameter_count())
    throw ContractError("mlp_backward: gradient buffer has wrong size");
  if (static_cast<int>(trace.layer_inputs.size()) != layers ||
      grad_output.rows() != trace.output.rows() ||
      grad_output.cols() != trace.output.cols())
    throw ContractError("mlp_backward: trace/grad_output shape mismatch");

  Eigen::MatrixXd delta;
  switch (spec.output_activation) {
    case Activation::kIdentity:
      delta = grad_output;
      break;
    case Activation::kSigmoid:
      delta = grad_output.cwiseProduct(
          trace.output.unaryExpr([](double s) { return s * (1.0 - s); }));
      break;
    case Activation::kExpClamped:
      delta = grad_output.cwiseProduct(trace.output.binaryExpr(
          trace.pre_output, [](double out, double t) {
            return std::abs(t) < kExpClampLimit ? out : 0.0;
          }));
      break;
  }

  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& in = trace.layer_inputs[l];
    Eigen::Map<Eigen::MatrixXd> gw(grad_params.data() + mlp.weight_offset(l),
                                   spec.layer_output(l), spec.layer_input(l));
    Eigen::Map<Eigen::VectorXd> gb(grad_params.data() + mlp.bias_offset(l),
                                   spec.layer_output(l));
    gw.noalias() += delta * in.transpose();
    gb += delta.rowwise().sum();
    if (l == 0 && grad_input == nullptr) break;
    Eigen::MatrixXd upstream = mlp.weight(l).transpose() * delta;
    if (l == 0) {
      *grad_input = std::move(upstream);
    } else {
      // ReLU mask: the layer input is positive exactly where the
      // pre-activation was.
      delta = upstream.cwiseProduct(
          in.unaryExpr([](double a) { return a > 0.0 ? 1.0 : 0.0; }));
    }
  }
}

void encode_direction(const Eigen::Vector3d& d, Eigen::Ref<Eigen::VectorXd> out) {
  if (out.size() != kDirectionEncodingWidth)
    throw ContractError("direction encoding buffer has wrong size");
  for (int k = 0; k < 3; ++k) {
    const double a = std::numbers::pi * d[k];
    out[k] = d[k];
    out[3 + 4 * k + 0] = std::sin(a);
    out[3 + 4 * k + 1] = std::cos(a);
    out[3 + 4 * k + 2] = std::sin(2.0 * a);
    out[3 + 4 * k + 3] = std::cos(2.0 * a);
  }
}

MlpSpec default_density_head(int input_width) {
  return {input_width, kDefaultHidden, 1, kGeometryWidth, Activation::kIdentity};
}

MlpSpec default_color_head(int geometry_width) {
  return {geometry_width + kDirectionEncodingWidth, kDefaultHidden, 2, 3,
          Activation::kSigmoid};
}

MlpSpec default_image_head(int input_width) {
  return {input_width, kDefaultHidden, 2, 3, Activation::kSigmoid};
}

void decode_density(const Mlp& density_head,
                    const Eigen::Ref<const Eigen::MatrixXd>& y_noisy,
                    MlpTrace& trace, Eigen::RowVectorXd& sigma) {
  mlp_forward(density_head, y_noisy, trace);
  sigma = trace.output.row(0).unaryExpr([](double t) { return exp_clamped(t); });
}

void decode_color(const Mlp& color_head,
                  const Eigen::Ref<const Eigen::MatrixXd>& geometry,
                  const Eigen::Ref<const Eigen::MatrixXd>& direction_encoding,
                  MlpTrace& trace) {
  if (geometry.cols() != direction_encoding.cols())
    throw ContractError("decode_color: geometry/direction column mismatch");
  Eigen::MatrixXd input(geometry.rows() + direction_encoding.rows(), geometry.cols());
  input.topRows(geometry.rows()) = geometry;
  input.bottomRows(direction_encoding.rows()) = direction_encoding;
  mlp_forward(color_head, input, trace);
}

}  // namespace cawa
