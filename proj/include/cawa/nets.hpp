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
#include <vector>

#include <Eigen/Core>

namespace cawa {

enum class Activation : std::uint8_t {
  kIdentity = 0,
  kSigmoid = 1,
  kExpClamped = 2,
};

std::string_view to_string(Activation a);

inline constexpr double kExpClampLimit = 15.0;

// exp(t) with t clamped to [-15, 15].
double exp_clamped(double t);

// Fully connected stack: `hidden_layers` ReLU layers of width `hidden`,
// followed by an affine output layer and `output_activation`.
struct MlpSpec {
  int input = 1;
  int hidden = 64;
  int hidden_layers = 1;
  int output = 1;
  Activation output_activation = Activation::kIdentity;

  void validate() const;
  int layer_count() const { return hidden_layers + 1; }
  int layer_input(int layer) const { return layer == 0 ? input : hidden; }
  int layer_output(int layer) const {
    return layer == hidden_layers ? output : hidden;
  }
  std::size_t parameter_count() const;

  bool operator==(const MlpSpec&) const = default;
};

// Flat parameter storage. Eigen's vectorized kernels pick their summation
// order from the buffer address, so a fixed alignment keeps results
// bit-reproducible across runs.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

// Parameters live in one flat buffer: for each layer, the out x in weight
// matrix (column-major) followed by the bias vector.
class Mlp {
 public:
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;

  Mlp() = default;
  explicit Mlp(const MlpSpec& spec);

  const MlpSpec& spec() const { return spec_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  ConstMatrixMap weight(int layer) const;
  MatrixMap weight(int layer);
  ConstVectorMap bias(int layer) const;
  VectorMap bias(int layer);

  // Offset of the layer's weights inside params().
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const;

 private:
  MlpSpec spec_;
  std::vector<std::size_t> offsets_;
  ParamVector params_;
};

// Uniform(+-sqrt(6 / fan_in)) weights, zero biases.
Mlp init_mlp(const MlpSpec& spec, std::uint64_t seed, std::uint64_t salt = 0);

// Activations recorded by mlp_forward; columns are samples.
struct MlpTrace {
  // layer_inputs[i] is the input of layer i (the raw input for i = 0).
  std::vector<Eigen::MatrixXd> layer_inputs;
  Eigen::MatrixXd pre_output;
  Eigen::MatrixXd output;
};

// input is (spec.input x n).
void mlp_forward(const Mlp& mlp, const Eigen::Ref<const Eigen::MatrixXd>& input,
                 MlpTrace& trace);
std::vector<double> mlp_forward(const Mlp& mlp, std::span<const double> x);

// Reverse pass. Adds d(loss)/d(params) into grad_params (same layout as
// Mlp::params()). When grad_input is non-null it is overwritten with
// d(loss)/d(input).
void mlp_backward(const Mlp& mlp, const MlpTrace& trace,
                  const Eigen::Ref<const Eigen::MatrixXd>& grad_output,
                  std::span<double> grad_params, Eigen::MatrixXd* grad_input);

// --- decoders -------------------------------------------------------------

// Direction features: d itself plus sin/cos of pi*d and 2*pi*d per axis.
inline constexpr int kDirectionEncodingWidth = 15;
void encode_direction(const Eigen::Vector3d& d,
                      Eigen::Ref<Eigen::VectorXd> out);

inline constexpr int kDefaultHidden = 64;
inline constexpr int kGeometryWidth = 16;

MlpSpec default_density_head(int input_width);
MlpSpec default_color_head(int geometry_width = kGeometryWidth);
MlpSpec default_image_head(int input_width);

// Density head with identity output; row 0 of the raw output is the
// log-density, the whole raw vector is the geometry feature handed to the
// colour head. sigma = exp_clamped(raw row 0).
void decode_density(const Mlp& density_head,
                    const Eigen::Ref<const Eigen::MatrixXd>& y_noisy,
                    MlpTrace& trace, Eigen::RowVectorXd& sigma);

// Colour head over [geometry; direction encoding]. rgb = trace.output.
void decode_color(const Mlp& color_head,
                  const Eigen::Ref<const Eigen::MatrixXd>& geometry,
                  const Eigen::Ref<const Eigen::MatrixXd>& direction_encoding,
                  MlpTrace& trace);

}  // namespace cawa
