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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cawa/entropy_model.hpp"
#include "cawa/field_core.hpp"
#include "cawa/image.hpp"
#include "cawa/nets.hpp"
#include "cawa/rd_objective.hpp"
#include "cawa/render.hpp"

namespace cawa {

enum class TaskKind : std::uint8_t { kImage = 0, kVolume = 1 };

std::string_view to_string(TaskKind kind);
TaskKind parse_task(std::string_view name);

struct ImageTaskConfig {
  std::string input;  // PPM path; empty selects the synthetic test card
  int synthetic_width = 64;
  int synthetic_height = 64;
  std::uint64_t synthetic_seed = 0;
};

struct VolumeTaskConfig {
  int views = 8;
  int heldout_views = 2;
  int width = 64;
  int height = 64;
  double camera_distance = 1.4;
  double fov_x = 0.9;
  int samples_per_ray = 64;
  bool stratified = true;
  int reference_samples = kMinReferenceSamples;
  AnalyticScene scene;
};

struct TrainConfig {
  TaskKind task = TaskKind::kImage;
  GridConfig grid{8, 12, 2, 4, 64, 2};
  int hidden_width = kDefaultHidden;
  double delta = 0.15;
  std::optional<Quantizer> quantizer;  // defaults to the distribution's pairing
  DistributionKind distribution = DistributionKind::kCauchy;
  double mu_init = 0.0;
  double b_init = 0.01;
  LambdaSchedule schedule;
  std::int64_t iterations = 3000;
  int batch_size = 4096;
  double lr_features = 1e-2;
  double lr_mlp = 1e-3;
  double lr_distribution = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-15;
  std::uint64_t seed = 0;
  bool feature_noise = true;  // quantization noise on interpolated features
  bool rate_enabled = true;   // false drops the rate model entirely
  int metrics_every = 100;
  ImageTaskConfig image;
  VolumeTaskConfig volume;

  QuantSpec quant() const;
  void validate() const;
};

// Desk-scale defaults for a task (grid dimensionality, batch size).
TrainConfig default_config(TaskKind task);

// Everything that is learned.
struct FieldModel {
  FeatureTable features;
  Mlp head;                  // image head, or density head for volumes
  std::optional<Mlp> color;  // colour head (volumes only)
  DistributionParams distribution;

  // Rounds every parameter to the nearest float, i.e. the checkpoint's
  // storage precision.
  void round_to_storage();
};

FieldModel init_model(const TrainConfig& config);

struct ModelGradients {
  FeatureTable features;
  ParamVector head;
  ParamVector color;
  double mu = 0.0;
  double b_raw = 0.0;

  explicit ModelGradients(const FieldModel& model);
  void zero();
};

// --- optimizer ------------------------------------------------------------

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-15;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct OptimizerState {
  AdamMoments features;
  AdamMoments head;
  AdamMoments color;
  AdamMoments distribution;  // {mu, b_raw}
  std::int64_t step = 0;
};

// One bias-corrected Adam step. `step` is 1-based; moments are sized lazily.
void adam_update(std::span<double> params, std::span<const double> grads,
                 AdamMoments& moments, std::int64_t step, const AdamHyper& hyper);

// --- tasks ----------------------------------------------------------------

class Task {
 public:
  virtual ~Task() = default;

  // Mean squared RGB error of the step's batch under `model`. When grads is
  // non-null, d(L_rgb)/d(parameters) is added into it. Noise and batch
  // selection depend only on (config.seed, step).
  virtual double distortion(const FieldModel& model, const TrainConfig& config,
                            std::int64_t step, ModelGradients* grads) const = 0;

  // Noise-free PSNR against held-out targets (all pixels for image fitting).
  virtual double evaluate_psnr(const FieldModel& model) const = 0;
  // Noise-free PSNR on the training targets.
  virtual double train_psnr(const FieldModel& model) const = 0;

  virtual std::vector<Image> render(const FieldModel& model, bool heldout) const = 0;

  virtual TaskKind kind() const = 0;
  // Checks that the model's shapes fit this task; throws ContractError naming
  // the offending fields.
  virtual void check_model(const FieldModel& model) const = 0;
};

class ImageTask final : public Task {
 public:
  explicit ImageTask(Image target);

  double distortion(const FieldModel& model, const TrainConfig& config,
                    std::int64_t step, ModelGradients* grads) const override;
  double evaluate_psnr(const FieldModel& model) const override;
  double train_psnr(const FieldModel& model) const override { return evaluate_psnr(model); }
  std::vector<Image> render(const FieldModel& model, bool heldout) const override;
  TaskKind kind() const override { return TaskKind::kImage; }
  void check_model(const FieldModel& model) const override;

  const Image& target() const { return target_; }

 private:
  Image target_;
};

class VolumeTask final : public Task {
 public:
  explicit VolumeTask(const VolumeTaskConfig& config);

  double distortion(const FieldModel& model, const TrainConfig& config,
                    std::int64_t step, ModelGradients* grads) const override;
  double evaluate_psnr(const FieldModel& model) const override;
  double train_psnr(const FieldModel& model) const override;
  std::vector<Image> render(const FieldModel& model, bool heldout) const override;
  TaskKind kind() const override { return TaskKind::kVolume; }
  void check_model(const FieldModel& model) const override;

  const std::vector<Image>& train_images() const { return train_images_; }
  const std::vector<Image>& heldout_images() const { return heldout_images_; }

 private:
  double trace_rays(const FieldModel& model, const std::vector<Ray>& rays,
                    std::span<const double> targets, int samples, Rng* jitter,
                    Rng* noise, double delta, ModelGradients* grads,
                    std::span<double> colors_out) const;
  double views_psnr(const FieldModel& model, const std::vector<Camera>& cams,
                    const std::vector<Image>& targets) const;
  std::vector<Image> render_views(const FieldModel& model,
                                  const std::vector<Camera>& cams) const;

  VolumeTaskConfig config_;
  std::vector<Camera> train_cameras_;
  std::vector<Camera> heldout_cameras_;
  std::vector<Image> train_images_;
  std::vector<Image> heldout_images_;
};

// Builds the task a config describes (reads the input image, renders the
// volume references). Throws IoError naming the path on missing input.
std::unique_ptr<Task> make_task(const TrainConfig& config);

// --- training loop ----------------------------------------------------------

struct StepMetrics {
  std::int64_t step = 0;
  double l_rgb = 0.0;
  double rate_bits = 0.0;
  double lambda_eff = 0.0;
  double loss = 0.0;
  double psnr = 0.0;
  double seconds = 0.0;  // wall clock since training started
};

class Trainer {
 public:
  Trainer(TrainConfig config, const Task& task);

  // Global loss and its gradient for `step` at the given model. Pure apart
  // from reading the schedule state; used both by train_step and by
  // finite-difference checks.
  StepMetrics evaluate(const FieldModel& model, std::int64_t step,
                       ModelGradients* grads) const;

  StepMetrics train_step();

  const FieldModel& model() const { return model_; }
  FieldModel& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<StepMetrics>& history() const { return history_; }
  const ScheduleState& schedule_state() const { return schedule_state_; }
  std::int64_t step() const { return optimizer_.step; }

 private:
  TrainConfig config_;
  const Task& task_;
  FieldModel model_;
  OptimizerState optimizer_;
  ScheduleState schedule_state_;
  std::vector<StepMetrics> history_;
  double elapsed_ = 0.0;
};

struct TrainResult {
  FieldModel model;                 // rounded to storage precision
  std::vector<StepMetrics> history;  // every step
  double final_psnr = 0.0;          // held-out, float model
  double seconds = 0.0;
};

using ProgressFn = std::function<void(const StepMetrics&)>;

TrainResult train(const Task& task, const TrainConfig& config,
                  const ProgressFn& progress = {});

// "step,l_rgb,rate_bits,lambda_eff,loss,psnr" rows for every `every`-th step
// and the final step.
void write_metrics_csv(const std::vector<StepMetrics>& history, int every,
                       std::ostream& out);

// --- checkpoint -------------------------------------------------------------
//
// Layout (little-endian):
//   "CAWC" | u16 version=1 | u8 dims | u8 levels | u8 features | u8 log2T |
//   u32 n_min | u32 n_max | u8 distribution | u8 head count (1 or 2) |
//   per head: u16 input, u16 hidden, u8 hidden_layers, u16 output,
//             u8 output activation |
//   u64 feature count | u64 parameter count per head |
//   f32 features | f32 head params (per head, in order) | f32 mu | f32 b_raw
inline constexpr char kCheckpointMagic[4] = {'C', 'A', 'W', 'C'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> checkpoint_bytes(const FieldModel& model);
FieldModel parse_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const FieldModel& model, const std::filesystem::path& path);
FieldModel load_checkpoint(const std::filesystem::path& path);

// Writes via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace cawa
