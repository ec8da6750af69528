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

// Image fitting and volume reconstruction tasks.

#include <algorithm>
#include <cmath>
#include <string>

#include "cawa/error.hpp"
#include "cawa/rng.hpp"
#include "cawa/trainer.hpp"

namespace cawa {
namespace {

constexpr std::size_t kEvalChunk = 4096;

void require_head(const Mlp& mlp, const MlpSpec& want, const char* what) {
  const MlpSpec& got = mlp.spec();
  if (got.input != want.input || got.output != want.output ||
      got.output_activation != want.output_activation)
    throw ContractError(std::string(what) + " has input " + std::to_string(got.input) +
                        " / output " + std::to_string(got.output) + ", expected " +
                        std::to_string(want.input) + " / " + std::to_string(want.output));
}

// Encodes the columns of `positions` (dims x n) into y (LF x n), recording
// one trace per column.
void encode_batch(const FeatureTable& table, const Eigen::MatrixXd& positions,
                  std::vector<EncodeTrace>& traces, Eigen::MatrixXd& y) {
  const auto n = static_cast<std::size_t>(positions.cols());
  const int dims = table.dims();
  const int width = table.config().output_width();
  y.resize(width, static_cast<Eigen::Index>(n));
  traces.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (traces[i].levels() == 0) traces[i] = EncodeTrace(table.config());
    encode({positions.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(dims)},
           table, traces[i]);
    const auto out = traces[i].output();
    std::copy(out.begin(), out.end(), y.col(static_cast<Eigen::Index>(i)).data());
  }
}

void encode_batch_backward(const std::vector<EncodeTrace>& traces, const Eigen::MatrixXd& grad_y,
                           FeatureTable& grad_table) {
  for (std::size_t i = 0; i < traces.size(); ++i)
    encode_backward(traces[i],
                    {grad_y.col(static_cast<Eigen::Index>(i)).data(),
                     static_cast<std::size_t>(grad_y.rows())},
                    grad_table);
}

}  // namespace

// --- image ------------------------------------------------------------------

ImageTask::ImageTask(Image target) : target_(std::move(target)) {
  if (target_.width < 1 || target_.height < 1 || target_.rgb.size() != target_.pixel_count() * 3)
    throw ContractError("image task: empty or malformed target image");
}

void ImageTask::check_model(const FieldModel& model) const {
  if (model.features.dims() != 2)
    throw ContractError("image task needs grid.dims = 2, got " +
                        std::to_string(model.features.dims()));
  require_head(model.head, default_image_head(model.features.config().output_width()),
               "image head");
  if (model.color) throw ContractError("image task: unexpected colour head");
}

double ImageTask::distortion(const FieldModel& model, const TrainConfig& config,
                             std::int64_t step, ModelGradients* grads) const {
  const std::size_t pixels = target_.pixel_count();
  const std::size_t n = std::min<std::size_t>(pixels, static_cast<std::size_t>(config.batch_size));
  const bool full = n == pixels;
  Rng batch_rng(config.seed, Stream::kBatch, static_cast<std::uint64_t>(step));

  Eigen::MatrixXd pos(2, static_cast<Eigen::Index>(n));
  std::vector<double> target(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = full ? i : batch_rng.below(pixels);
    const int px = static_cast<int>(p % target_.width);
    const int py = static_cast<int>(p / target_.width);
    pos(0, static_cast<Eigen::Index>(i)) = (px + 0.5) / target_.width;
    pos(1, static_cast<Eigen::Index>(i)) = (py + 0.5) / target_.height;
    for (int c = 0; c < 3; ++c) target[i * 3 + c] = target_.at(px, py, c);
  }

  std::vector<EncodeTrace> traces;
  Eigen::MatrixXd y;
  encode_batch(model.features, pos, traces, y);
  if (config.feature_noise) {
    Rng noise(config.seed, Stream::kFeatureNoise, static_cast<std::uint64_t>(step));
    inject_noise({y.data(), static_cast<std::size_t>(y.size())}, config.delta, noise);
  }
  MlpTrace trace;
  mlp_forward(model.head, y, trace);
  const Eigen::MatrixXd& rgb = trace.output;
  Eigen::MatrixXd grad_rgb(3, static_cast<Eigen::Index>(n));
  const double loss = rgb_loss({rgb.data(), static_cast<std::size_t>(rgb.size())}, target,
                               {grad_rgb.data(), static_cast<std::size_t>(grad_rgb.size())});
  if (grads) {
    Eigen::MatrixXd grad_y;
    mlp_backward(model.head, trace, grad_rgb, grads->head, &grad_y);
    encode_batch_backward(traces, grad_y, grads->features);
  }
  return loss;
}

std::vector<Image> ImageTask::render(const FieldModel& model, bool) const {
  Image out(target_.width, target_.height);
  const std::size_t pixels = target_.pixel_count();
  std::vector<EncodeTrace> traces;
  Eigen::MatrixXd y;
  MlpTrace trace;
  for (std::size_t start = 0; start < pixels; start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, pixels - start);
    Eigen::MatrixXd pos(2, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t p = start + i;
      pos(0, static_cast<Eigen::Index>(i)) = (static_cast<double>(p % target_.width) + 0.5) / target_.width;
      pos(1, static_cast<Eigen::Index>(i)) = (static_cast<double>(p / target_.width) + 0.5) / target_.height;
    }
    encode_batch(model.features, pos, traces, y);
    mlp_forward(model.head, y, trace);
    std::copy(trace.output.data(), trace.output.data() + n * 3, out.rgb.begin() + static_cast<std::ptrdiff_t>(start * 3));
  }
  return {out};
}

double ImageTask::evaluate_psnr(const FieldModel& model) const {
  const Image out = render(model, true).front();
  return psnr(rgb_loss(out.rgb, target_.rgb, {}));
}

// --- volume -----------------------------------------------------------------

namespace {
// Held-out views sit between the training views on the orbit.
constexpr double kHeldoutPhase = 1.2;
}  // namespace

VolumeTask::VolumeTask(const VolumeTaskConfig& config) : config_(config) {
  config_.scene.validate();
  if (config_.views < 1) throw ContractError("volume task: views must be >= 1");
  train_cameras_ = orbit_cameras(config_.views, config_.camera_distance, config_.fov_x,
                                 config_.width, config_.height);
  heldout_cameras_ = orbit_cameras(config_.heldout_views, config_.camera_distance,
                                   config_.fov_x, config_.width, config_.height, kHeldoutPhase);
  for (const Camera& cam : train_cameras_)
    train_images_.push_back(render_reference(config_.scene, cam, config_.reference_samples));
  for (const Camera& cam : heldout_cameras_)
    heldout_images_.push_back(render_reference(config_.scene, cam, config_.reference_samples));
}

void VolumeTask::check_model(const FieldModel& model) const {
  if (model.features.dims() != 3)
    throw ContractError("volume task needs grid.dims = 3, got " +
                        std::to_string(model.features.dims()));
  if (!model.color) throw ContractError("volume task: missing colour head");
  require_head(model.head, default_density_head(model.features.config().output_width()),
               "density head");
  require_head(*model.color, default_color_head(model.head.spec().output), "colour head");
}

double VolumeTask::trace_rays(const FieldModel& model, const std::vector<Ray>& rays,
                              std::span<const double> targets, int samples, Rng* jitter,
                              Rng* noise, double delta, ModelGradients* grads,
                              std::span<double> colors_out) const {
  const std::size_t n_rays = rays.size();
  const auto ns = static_cast<std::size_t>(samples);

  // Rays that miss the cube contribute black and carry no parameters.
  std::vector<std::size_t> hit;
  std::vector<std::pair<double, double>> spans;
  for (std::size_t r = 0; r < n_rays; ++r) {
    if (auto s = intersect_unit_cube(rays[r]); s && s->second > s->first) {
      hit.push_back(r);
      spans.push_back(*s);
    }
  }
  const std::size_t total = hit.size() * ns;
  Eigen::MatrixXd pos(3, static_cast<Eigen::Index>(total));
  Eigen::MatrixXd dir_enc(kDirectionEncodingWidth, static_cast<Eigen::Index>(total));
  std::vector<double> t(total), dt(total);
  Eigen::VectorXd enc(kDirectionEncodingWidth);
  for (std::size_t h = 0; h < hit.size(); ++h) {
    const Ray& ray = rays[hit[h]];
    const std::size_t base = h * ns;
    sample_interval(spans[h].first, spans[h].second, samples, jitter, jitter != nullptr,
                    {t.data() + base, ns}, {dt.data() + base, ns});
    encode_direction(ray.direction, enc);
    for (std::size_t i = 0; i < ns; ++i) {
      const auto col = static_cast<Eigen::Index>(base + i);
      pos.col(col) = (ray.origin + t[base + i] * ray.direction).cwiseMax(0.0).cwiseMin(1.0);
      dir_enc.col(col) = enc;
    }
  }

  std::vector<EncodeTrace> traces;
  Eigen::MatrixXd y;
  encode_batch(model.features, pos, traces, y);
  if (noise) inject_noise({y.data(), static_cast<std::size_t>(y.size())}, delta, *noise);
  MlpTrace density_trace, color_trace;
  Eigen::RowVectorXd sigma;
  decode_density(model.head, y, density_trace, sigma);
  decode_color(*model.color, density_trace.output, dir_enc, color_trace);
  const Eigen::MatrixXd& rgb = color_trace.output;

  std::vector<double> pred(n_rays * 3, 0.0);
  for (std::size_t h = 0; h < hit.size(); ++h) {
    const std::size_t base = h * ns;
    const Eigen::Vector3d c = composite({sigma.data() + base, ns}, {rgb.data() + base * 3, ns * 3},
                                        {dt.data() + base, ns}, {});
    for (int k = 0; k < 3; ++k) pred[hit[h] * 3 + k] = c[k];
  }
  double loss = 0.0;
  std::vector<double> grad_pred(n_rays * 3);
  if (!targets.empty()) loss = rgb_loss(pred, targets, grad_pred);
  if (!colors_out.empty()) std::copy(pred.begin(), pred.end(), colors_out.begin());

  if (grads && !targets.empty() && total > 0) {
    Eigen::RowVectorXd grad_sigma(static_cast<Eigen::Index>(total));
    Eigen::MatrixXd grad_rgb(3, static_cast<Eigen::Index>(total));
    for (std::size_t h = 0; h < hit.size(); ++h) {
      const std::size_t base = h * ns;
      const Eigen::Vector3d g(grad_pred[hit[h] * 3], grad_pred[hit[h] * 3 + 1],
                              grad_pred[hit[h] * 3 + 2]);
      composite_backward({sigma.data() + base, ns}, {rgb.data() + base * 3, ns * 3},
                         {dt.data() + base, ns}, g, {grad_sigma.data() + base, ns},
                         {grad_rgb.data() + base * 3, ns * 3});
    }
    Eigen::MatrixXd grad_in;
    mlp_backward(*model.color, color_trace, grad_rgb, grads->color, &grad_in);
    Eigen::MatrixXd grad_geometry = grad_in.topRows(model.head.spec().output);
    // sigma = exp_clamped(raw_0): the clamp passes no gradient.
    const Eigen::MatrixXd& raw = density_trace.output;
    for (Eigen::Index i = 0; i < raw.cols(); ++i)
      if (std::abs(raw(0, i)) < kExpClampLimit) grad_geometry(0, i) += grad_sigma[i] * sigma[i];
    Eigen::MatrixXd grad_y;
    mlp_backward(model.head, density_trace, grad_geometry, grads->head, &grad_y);
    encode_batch_backward(traces, grad_y, grads->features);
  }
  return loss;
}

double VolumeTask::distortion(const FieldModel& model, const TrainConfig& config,
                              std::int64_t step, ModelGradients* grads) const {
  const auto s = static_cast<std::uint64_t>(step);
  Rng batch_rng(config.seed, Stream::kBatch, s);
  const std::size_t n = static_cast<std::size_t>(config.batch_size);
  const std::size_t pixels = static_cast<std::size_t>(config_.width) * config_.height;
  std::vector<Ray> rays(n);
  std::vector<double> targets(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t view = batch_rng.below(train_cameras_.size());
    const std::size_t p = batch_rng.below(pixels);
    const Pixel px{static_cast<int>(p % config_.width), static_cast<int>(p / config_.width)};
    rays[i] = generate_ray(train_cameras_[view], px);
    for (int c = 0; c < 3; ++c) targets[i * 3 + c] = train_images_[view].at(px.x, px.y, c);
  }
  Rng jitter(config.seed, Stream::kJitter, s);
  Rng noise(config.seed, Stream::kFeatureNoise, s);
  return trace_rays(model, rays, targets, config_.samples_per_ray,
                    config_.stratified ? &jitter : nullptr,
                    config.feature_noise ? &noise : nullptr, config.delta, grads, {});
}

std::vector<Image> VolumeTask::render_views(const FieldModel& model,
                                            const std::vector<Camera>& cams) const {
  std::vector<Image> out;
  for (const Camera& cam : cams) {
    Image img(cam.width, cam.height);
    const std::size_t pixels = img.pixel_count();
    for (std::size_t start = 0; start < pixels; start += kEvalChunk) {
      const std::size_t n = std::min(kEvalChunk, pixels - start);
      std::vector<Ray> rays(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = start + i;
        rays[i] = generate_ray(cam, Pixel{static_cast<int>(p % cam.width),
                                          static_cast<int>(p / cam.width)});
      }
      trace_rays(model, rays, {}, config_.samples_per_ray, nullptr, nullptr, 0.0, nullptr,
                 {img.rgb.data() + start * 3, n * 3});
    }
    out.push_back(std::move(img));
  }
  return out;
}

double VolumeTask::views_psnr(const FieldModel& model, const std::vector<Camera>& cams,
                              const std::vector<Image>& targets) const {
  if (cams.empty()) throw ContractError("volume task: no views to evaluate");
  const std::vector<Image> renders = render_views(model, cams);
  double sum = 0.0;
  for (std::size_t v = 0; v < renders.size(); ++v)
    sum += rgb_loss(renders[v].rgb, targets[v].rgb, {});
  return psnr(sum / static_cast<double>(renders.size()));
}

double VolumeTask::evaluate_psnr(const FieldModel& model) const {
  return views_psnr(model, heldout_cameras_, heldout_images_);
}

double VolumeTask::train_psnr(const FieldModel& model) const {
  return views_psnr(model, train_cameras_, train_images_);
}

std::vector<Image> VolumeTask::render(const FieldModel& model, bool heldout) const {
  return render_views(model, heldout ? heldout_cameras_ : train_cameras_);
}

std::unique_ptr<Task> make_task(const TrainConfig& config) {
  if (config.task == TaskKind::kVolume) return std::make_unique<VolumeTask>(config.volume);
  if (config.image.input.empty())
    return std::make_unique<ImageTask>(synthetic_image(
        config.image.synthetic_width, config.image.synthetic_height,
        config.image.synthetic_seed));
  return std::make_unique<ImageTask>(read_ppm(config.image.input));
}

}  // namespace cawa
