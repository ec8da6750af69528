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

// Model containers, optimizer, checkpoint and file helpers.

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "cawa/error.hpp"
#include "cawa/trainer.hpp"

namespace cawa {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::kImage ? "image" : "volume";
}

TaskKind parse_task(std::string_view name) {
  if (name == "image") return TaskKind::kImage;
  if (name == "volume") return TaskKind::kVolume;
  throw ContractError("unknown task '" + std::string(name) + "' (expected image or volume)");
}

TrainConfig default_config(TaskKind task) {
  TrainConfig c;
  c.task = task;
  if (task == TaskKind::kVolume) {
    c.grid = GridConfig{8, 14, 2, 4, 128, 3};
    c.batch_size = 1024;
  }
  return c;
}

QuantSpec TrainConfig::quant() const {
  QuantSpec q = QuantSpec::default_for(distribution, delta);
  if (quantizer) q.quantizer = *quantizer;
  return q;
}

void TrainConfig::validate() const {
  grid.validate();
  const int want_dims = task == TaskKind::kImage ? 2 : 3;
  if (grid.dims != want_dims)
    throw ContractError("grid.dims must be " + std::to_string(want_dims) + " for the " +
                        std::string(to_string(task)) + " task");
  if (hidden_width < 1) throw ContractError("hidden_width must be >= 1");
  if (iterations < 1) throw ContractError("iterations must be >= 1");
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  if (!(lr_features > 0.0) || !(lr_mlp > 0.0) || !(lr_distribution > 0.0))
    throw ContractError("learning rates must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ContractError("optimizer betas must be in [0, 1)");
  if (!(eps >= 0.0)) throw ContractError("optimizer eps must be >= 0");
  if (!(b_init > 0.0)) throw ContractError("b_init must be > 0");
  if (!std::isfinite(mu_init)) throw ContractError("mu_init must be finite");
  if (metrics_every < 1) throw ContractError("metrics_every must be >= 1");
  quant().validate();
  schedule.validate();
  if (task == TaskKind::kVolume) {
    if (volume.views < 1 || volume.heldout_views < 0)
      throw ContractError("volume.views must be >= 1");
    if (volume.width < 1 || volume.height < 1)
      throw ContractError("volume image size must be >= 1");
    if (volume.samples_per_ray < 1) throw ContractError("volume.samples_per_ray must be >= 1");
    if (volume.reference_samples < kMinReferenceSamples)
      throw ContractError("volume.reference_samples must be >= 512");
    volume.scene.validate();
  }
}

void FieldModel::round_to_storage() {
  auto round = [](std::span<double> xs) {
    for (double& x : xs) x = static_cast<float>(x);
  };
  round(features.values());
  round(head.params());
  if (color) round(color->params());
  distribution.round_to_storage();
}

FieldModel init_model(const TrainConfig& config) {
  config.validate();
  FieldModel model;
  model.features = init_table(config.grid, config.seed);
  const int width = config.grid.output_width();
  if (config.task == TaskKind::kImage) {
    MlpSpec spec = default_image_head(width);
    spec.hidden = config.hidden_width;
    model.head = init_mlp(spec, config.seed, 0);
  } else {
    MlpSpec density = default_density_head(width);
    density.hidden = config.hidden_width;
    MlpSpec color = default_color_head(density.output);
    color.hidden = config.hidden_width;
    model.head = init_mlp(density, config.seed, 0);
    model.color = init_mlp(color, config.seed, 1);
  }
  model.distribution =
      DistributionParams::from_scale(config.distribution, config.mu_init, config.b_init);
  return model;
}

ModelGradients::ModelGradients(const FieldModel& model)
    : features(model.features.config()),
      head(model.head.params().size(), 0.0),
      color(model.color ? model.color->params().size() : 0, 0.0) {}

void ModelGradients::zero() {
  std::fill(features.values().begin(), features.values().end(), 0.0);
  std::fill(head.begin(), head.end(), 0.0);
  std::fill(color.begin(), color.end(), 0.0);
  mu = 0.0;
  b_raw = 0.0;
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 AdamMoments& moments, std::int64_t step, const AdamHyper& hyper) {
  if (params.size() != grads.size())
    throw ContractError("adam_update: parameter/gradient size mismatch");
  if (step < 1) throw ContractError("adam_update: step is 1-based");
  if (moments.m.size() != params.size()) {
    moments.m.assign(params.size(), 0.0);
    moments.v.assign(params.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = moments.m[i];
    double& v = moments.v[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

// --- checkpoint -------------------------------------------------------------

namespace {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == b_.size(); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError("checkpoint: truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void write_spec(ByteWriter& w, const MlpSpec& s) {
  w.u16(static_cast<std::uint16_t>(s.input));
  w.u16(static_cast<std::uint16_t>(s.hidden));
  w.u8(static_cast<std::uint8_t>(s.hidden_layers));
  w.u16(static_cast<std::uint16_t>(s.output));
  w.u8(static_cast<std::uint8_t>(s.output_activation));
}

MlpSpec read_spec(ByteReader& r) {
  MlpSpec s;
  s.input = r.u16();
  s.hidden = r.u16();
  s.hidden_layers = r.u8();
  s.output = r.u16();
  const std::uint8_t act = r.u8();
  if (act > 2) throw FormatError("checkpoint: unknown activation code");
  s.output_activation = static_cast<Activation>(act);
  try {
    s.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const FieldModel& model) {
  const GridConfig& g = model.features.config();
  ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(g.dims));
  w.u8(static_cast<std::uint8_t>(g.levels));
  w.u8(static_cast<std::uint8_t>(g.features_per_entry));
  w.u8(static_cast<std::uint8_t>(g.log2_table_size));
  w.u32(static_cast<std::uint32_t>(g.n_min));
  w.u32(static_cast<std::uint32_t>(g.n_max));
  w.u8(static_cast<std::uint8_t>(model.distribution.kind));
  w.u8(model.color ? 2 : 1);
  write_spec(w, model.head.spec());
  if (model.color) write_spec(w, model.color->spec());
  w.u64(model.features.size());
  w.u64(model.head.params().size());
  if (model.color) w.u64(model.color->params().size());
  for (double v : model.features.values()) w.f32(v);
  for (double v : model.head.params()) w.f32(v);
  if (model.color)
    for (double v : model.color->params()) w.f32(v);
  w.f32(model.distribution.mu);
  w.f32(model.distribution.b_raw);
  return w.take();
}

FieldModel parse_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic))
    throw FormatError("checkpoint: bad magic");
  if (r.u16() != kCheckpointVersion) throw FormatError("checkpoint: unsupported version");
  GridConfig g;
  g.dims = r.u8();
  g.levels = r.u8();
  g.features_per_entry = r.u8();
  g.log2_table_size = r.u8();
  g.n_min = static_cast<int>(r.u32());
  g.n_max = static_cast<int>(r.u32());
  const std::uint8_t kind = r.u8();
  const std::uint8_t heads = r.u8();
  if (kind > 1 || heads < 1 || heads > 2) throw FormatError("checkpoint: bad header field");
  try {
    g.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  FieldModel model;
  model.features = FeatureTable(g);
  model.head = Mlp(read_spec(r));
  if (heads == 2) model.color = Mlp(read_spec(r));
  if (r.u64() != model.features.size()) throw FormatError("checkpoint: feature count mismatch");
  if (r.u64() != model.head.params().size()) throw FormatError("checkpoint: head size mismatch");
  if (model.color && r.u64() != model.color->params().size())
    throw FormatError("checkpoint: colour head size mismatch");
  for (double& v : model.features.values()) v = r.f32();
  for (double& v : model.head.params()) v = r.f32();
  if (model.color)
    for (double& v : model.color->params()) v = r.f32();
  model.distribution.kind = static_cast<DistributionKind>(kind);
  model.distribution.mu = r.f32();
  model.distribution.b_raw = r.f32();
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const FieldModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_bytes(model));
}

FieldModel load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace cawa
