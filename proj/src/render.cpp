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

#include "cawa/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cawa/error.hpp"

namespace cawa {

void Camera::validate() const {
  if (width < 1 || height < 1) throw ContractError("camera image size must be >= 1");
  if (!(fov_x > 0.0 && fov_x < std::numbers::pi))
    throw ContractError("camera field of view must be in (0, pi)");
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw ContractError("camera rotation is not orthonormal");
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double fov_x, int width,
                       int height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) throw ContractError("look_at: up is parallel to the view axis");
  right.normalize();
  const Eigen::Vector3d true_up = right.cross(forward);
  Camera cam;
  cam.position = eye;
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = true_up;
  cam.rotation.col(2) = forward;
  cam.fov_x = fov_x;
  cam.width = width;
  cam.height = height;
  return cam;
}

Ray generate_ray(const Camera& camera, Pixel pixel) {
  if (pixel.x < 0 || pixel.y < 0 || pixel.x >= camera.width || pixel.y >= camera.height)
    throw InputDomainError("pixel (" + std::to_string(pixel.x) + ", " +
                           std::to_string(pixel.y) + ") outside the image");
  const double spacing =
      camera.width > 1 ? 2.0 * std::tan(0.5 * camera.fov_x) / (camera.width - 1) : 0.0;
  const Eigen::Vector3d local(spacing * (pixel.x - 0.5 * (camera.width - 1)),
                              -spacing * (pixel.y - 0.5 * (camera.height - 1)), 1.0);
  return {camera.position, (camera.rotation * local).normalized()};
}

std::vector<Ray> generate_rays(const Camera& camera, std::span<const Pixel> pixels) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const Pixel& p : pixels) rays.push_back(generate_ray(camera, p));
  return rays;
}

std::optional<std::pair<double, double>> intersect_unit_cube(const Ray& ray) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double o = ray.origin[k];
    const double d = ray.direction[k];
    if (std::abs(d) < 1e-15) {
      if (o < 0.0 || o > 1.0) return std::nullopt;
      continue;
    }
    double a = (0.0 - o) / d;
    double b = (1.0 - o) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::make_pair(t0, t1);
}

void sample_interval(double t_near, double t_far, int n, Rng* rng,
                     bool stratified, std::span<double> t, std::span<double> delta) {
  if (!(t_far > t_near) || t_near < 0.0 || n < 1)
    throw InputDomainError("sample_interval needs t_far > t_near >= 0 and n >= 1");
  if (stratified && rng == nullptr)
    throw ContractError("stratified sampling needs a random stream");
  const double bin = (t_far - t_near) / n;
  for (int i = 0; i < n; ++i) {
    const double u = stratified ? rng->uniform() : 0.5;
    t[i] = t_near + (i + u) * bin;
  }
  for (int i = 0; i + 1 < n; ++i) delta[i] = t[i + 1] - t[i];
  delta[n - 1] = bin;
}

RaySamples sample_along(const Ray& ray, double t_near, double t_far, int n,
                        Rng* rng, bool stratified) {
  RaySamples s;
  s.t.resize(n);
  s.delta.resize(n);
  sample_interval(t_near, t_far, n, rng, stratified, s.t, s.delta);
  s.positions.resize(3 * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k)
      s.positions[3 * i + k] =
          std::clamp(ray.origin[k] + s.t[i] * ray.direction[k], 0.0, 1.0);
  s.sigma.assign(n, 0.0);
  s.color.assign(3 * static_cast<std::size_t>(n), 0.0);
  return s;
}

Eigen::Vector3d composite(std::span<const double> sigma,
                          std::span<const double> colors,
                          std::span<const double> delta,
                          std::span<double> weights) {
  const std::size_t n = sigma.size();
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  double transmittance = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = -std::expm1(-sigma[i] * delta[i]);
    const double w = transmittance * alpha;
    if (!weights.empty()) weights[i] = w;
    out[0] += w * colors[3 * i + 0];
    out[1] += w * colors[3 * i + 1];
    out[2] += w * colors[3 * i + 2];
    transmittance *= 1.0 - alpha;
  }
  return out;
}

CompositeResult composite(const RaySamples& samples) {
  CompositeResult r;
  r.weights.resize(samples.size());
  r.color = composite(samples.sigma, samples.color, samples.delta, r.weights);
  return r;
}

void composite_backward(std::span<const double> sigma,
                        std::span<const double> colors,
                        std::span<const double> delta,
                        const Eigen::Vector3d& grad_out,
                        std::span<double> grad_sigma,
                        std::span<double> grad_color) {
  const std::size_t n = sigma.size();
  // Forward sweep for T_i and w_i; w_i is staged in grad_sigma.
  double transmittance = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = -std::expm1(-sigma[i] * delta[i]);
    grad_sigma[i] = transmittance * alpha;
    transmittance *= 1.0 - alpha;
  }
  // Backward sweep: dC/dsigma_k = delta_k (T_{k+1} c_k - sum_{i>k} w_i c_i).
  double suffix = 0.0;  // <g, sum_{i>k} w_i c_i>
  double t_next = transmittance;
  for (std::size_t k = n; k-- > 0;) {
    const double w = grad_sigma[k];
    const double gc = grad_out[0] * colors[3 * k] + grad_out[1] * colors[3 * k + 1] +
                      grad_out[2] * colors[3 * k + 2];
    grad_color[3 * k + 0] = w * grad_out[0];
    grad_color[3 * k + 1] = w * grad_out[1];
    grad_color[3 * k + 2] = w * grad_out[2];
    grad_sigma[k] = delta[k] * (t_next * gc - suffix);
    suffix += w * gc;
    // T_k = T_{k+1} + w_k
    t_next += w;
  }
}

void AnalyticScene::validate() const {
  if (!(radius > 0.0)) throw ContractError("scene radius must be > 0");
  if (!(density > 0.0)) throw ContractError("scene density must be > 0");
  for (int k = 0; k < 3; ++k)
    if (center[k] - radius < 0.0 || center[k] + radius > 1.0)
      throw ContractError("scene sphere must lie inside the unit cube");
}

SceneSample scene_eval(const AnalyticScene& scene, const Eigen::Vector3d& x) {
  SceneSample s;
  s.sigma = (x - scene.center).squaredNorm() <= scene.radius * scene.radius
                ? scene.density
                : 0.0;
  s.color = x.cwiseMax(0.0).cwiseMin(1.0);
  return s;
}

Image render_reference(const AnalyticScene& scene, const Camera& camera, int n_dense) {
  scene.validate();
  camera.validate();
  if (n_dense < kMinReferenceSamples)
    throw ContractError("reference renders need at least 512 samples per ray");
  Image image(camera.width, camera.height);
  std::vector<double> sigma(n_dense), colors(3 * static_cast<std::size_t>(n_dense)),
      delta(n_dense);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Ray ray = generate_ray(camera, {x, y});
      const auto box = intersect_unit_cube(ray);
      if (!box) continue;
      const Eigen::Vector3d oc = ray.origin - scene.center;
      const double b = ray.direction.dot(oc);
      const double disc = b * b - (oc.squaredNorm() - scene.radius * scene.radius);
      if (disc <= 0.0) continue;
      const double enter = -b - std::sqrt(disc);
      const double exit = -b + std::sqrt(disc);
      const auto [t0, t1] = *box;
      const double seg = (t1 - t0) / n_dense;
      for (int i = 0; i < n_dense; ++i) {
        const double a = t0 + i * seg;
        const double lo = std::max(a, enter);
        const double hi = std::min(a + seg, exit);
        delta[i] = seg;
        if (hi > lo) {
          sigma[i] = scene.density * (hi - lo) / seg;
          const Eigen::Vector3d c =
              scene_eval(scene, ray.origin + 0.5 * (lo + hi) * ray.direction).color;
          colors[3 * i] = c[0];
          colors[3 * i + 1] = c[1];
          colors[3 * i + 2] = c[2];
        } else {
          sigma[i] = 0.0;
          colors[3 * i] = colors[3 * i + 1] = colors[3 * i + 2] = 0.0;
        }
      }
      const Eigen::Vector3d c = composite(sigma, colors, delta, {});
      for (int ch = 0; ch < 3; ++ch) image.at(x, y, ch) = c[ch];
    }
  }
  return image;
}

std::vector<Camera> orbit_cameras(int count, double distance, double fov_x,
                                  int width, int height, double phase) {
  std::vector<Camera> cams;
  const Eigen::Vector3d center(0.5, 0.5, 0.5);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = i * golden + phase;
    const Eigen::Vector3d dir(r * std::cos(phi), r * std::sin(phi), z);
    const Eigen::Vector3d up =
        std::abs(dir.z()) > 0.99 ? Eigen::Vector3d::UnitY() : Eigen::Vector3d::UnitZ();
    cams.push_back(Camera::look_at(center + distance * dir, center, up, fov_x, width, height));
  }
  return cams;
}

}  // namespace cawa
