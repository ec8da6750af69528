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

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cawa/image.hpp"
#include "cawa/rng.hpp"

namespace cawa {

// Pinhole camera. rotation maps camera axes to world: column 0 is image
// right, column 1 image up, column 2 the viewing (forward) direction.
// fov_x spans the centres of the leftmost and rightmost pixel columns.
struct Camera {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double fov_x = 0.8;  // radians
  int width = 1;
  int height = 1;

  void validate() const;
  Eigen::Vector3d forward() const { return rotation.col(2); }

  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double fov_x, int width,
                        int height);
};

struct Pixel {
  int x = 0;
  int y = 0;
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit length
};

Ray generate_ray(const Camera& camera, Pixel pixel);
std::vector<Ray> generate_rays(const Camera& camera, std::span<const Pixel> pixels);

// Parametric interval where the ray is inside [0,1]^3, clipped to t >= 0.
std::optional<std::pair<double, double>> intersect_unit_cube(const Ray& ray);

// Per-ray sample set. positions/color hold three values per sample.
struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<double> positions;
  std::vector<double> sigma;
  std::vector<double> color;

  std::size_t size() const { return t.size(); }
};

// N samples on [t_near, t_far]: bin midpoints, or one uniform jitter per bin
// when `stratified` (rng required). delta_i = t_{i+1} - t_i, and the last
// spacing is the bin width. Positions are clamped into the unit cube.
RaySamples sample_along(const Ray& ray, double t_near, double t_far, int n,
                        Rng* rng, bool stratified);

// Writes t and delta for one ray into caller buffers; shared with the
// trainer's batched path.
void sample_interval(double t_near, double t_far, int n, Rng* rng,
                     bool stratified, std::span<double> t, std::span<double> delta);

struct CompositeResult {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  std::vector<double> weights;
};

// alpha_i = 1 - exp(-sigma_i delta_i), T_i = prod_{j<i} (1 - alpha_j),
// C = sum_i T_i alpha_i c_i over a black background. colors holds 3 values
// per sample; weights (if non-empty) receives w_i = T_i alpha_i.
Eigen::Vector3d composite(std::span<const double> sigma,
                          std::span<const double> colors,
                          std::span<const double> delta,
                          std::span<double> weights);
CompositeResult composite(const RaySamples& samples);

// Exact adjoint of composite. Overwrites grad_sigma (N) and grad_color (3N).
void composite_backward(std::span<const double> sigma,
                        std::span<const double> colors,
                        std::span<const double> delta,
                        const Eigen::Vector3d& grad_out,
                        std::span<double> grad_sigma,
                        std::span<double> grad_color);

// Ground-truth toy scene: a constant-density sphere whose emitted colour is
// the position itself.
struct AnalyticScene {
  Eigen::Vector3d center{0.5, 0.5, 0.5};
  double radius = 0.3;
  double density = 100.0;

  void validate() const;
};

struct SceneSample {
  double sigma = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

SceneSample scene_eval(const AnalyticScene& scene, const Eigen::Vector3d& x);

inline constexpr int kMinReferenceSamples = 512;

// Deterministic reference render with n_dense equal segments per ray. Each
// segment's optical depth is the exact density integral over the segment
// (the sphere chord length times the density) and its colour is taken at the
// midpoint of the occupied part, so silhouettes do not alias with n_dense.
Image render_reference(const AnalyticScene& scene, const Camera& camera,
                       int n_dense = kMinReferenceSamples);

// Cameras on a sphere around the cube centre looking inwards.
std::vector<Camera> orbit_cameras(int count, double distance, double fov_x,
                                  int width, int height, double phase = 0.0);

}  // namespace cawa
