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

#include "cawa/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cawa/codec_io.hpp"
#include "cawa/error.hpp"

namespace cawa {

using nlohmann::json;

namespace {

// --- strict config reading ---------------------------------------------------

std::string join_key(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object())
      throw ContractError("config key '" + (prefix_.empty() ? std::string("<root>") : prefix_) +
                          "' must be an object");
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "must be a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "must be an integer");
      if (v->is_number_unsigned()) {
        const auto u = v->get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max()))
          fail(key, "is out of range");
        out = static_cast<Int>(u);
      } else {
        const auto s = v->get<std::int64_t>();
        if constexpr (std::is_unsigned_v<Int>) {
          if (s < 0) fail(key, "must be non-negative");
        } else {
          if (s < std::numeric_limits<Int>::min() || s > std::numeric_limits<Int>::max())
            fail(key, "is out of range");
        }
        out = static_cast<Int>(s);
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      out = v->get<std::string>();
    }
  }

  template <typename Enum, typename Parse>
  void enumeration(const std::string& key, Enum& out, Parse parse) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      try {
        out = parse(v->get<std::string>());
      } catch (const ContractError& e) {
        fail(key, e.what());
      }
    }
  }

  std::string path(const std::string& key) const { return join_key(prefix_, key); }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ContractError("config key '" + path(key) + "' " + why);
  }

  // Rejects any key that no reader call asked for.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key()))
        throw ContractError("unknown config key '" + path(it.key()) + "'");
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> used_;
};

void read_grid(const json& j, GridConfig& g) {
  ObjectReader r(j, "grid");
  r.integer("levels", g.levels);
  r.integer("log2_table_size", g.log2_table_size);
  r.integer("features_per_entry", g.features_per_entry);
  r.integer("n_min", g.n_min);
  r.integer("n_max", g.n_max);
  r.integer("dims", g.dims);
  r.finish();
}

void read_schedule(const json& j, LambdaSchedule& s) {
  ObjectReader r(j, "schedule");
  r.enumeration("mode", s.mode, parse_lambda_mode);
  r.number("lambda", s.lambda);
  r.number("lambda_bar", s.lambda_bar);
  r.number("threshold", s.threshold);
  r.finish();
}

void read_image(const json& j, ImageTaskConfig& c) {
  ObjectReader r(j, "image");
  r.string("input", c.input);
  r.integer("synthetic_width", c.synthetic_width);
  r.integer("synthetic_height", c.synthetic_height);
  r.integer("synthetic_seed", c.synthetic_seed);
  r.finish();
}

void read_scene(const json& j, AnalyticScene& s) {
  ObjectReader r(j, "volume.scene");
  if (const json* c = r.find("center")) {
    if (!c->is_array() || c->size() != 3)
      r.fail("center", "must be an array of three numbers");
    for (int i = 0; i < 3; ++i) {
      if (!(*c)[i].is_number()) r.fail("center", "must be an array of three numbers");
      s.center[i] = (*c)[i].get<double>();
    }
  }
  r.number("radius", s.radius);
  r.number("density", s.density);
  r.finish();
}

void read_volume(const json& j, VolumeTaskConfig& c) {
  ObjectReader r(j, "volume");
  r.integer("views", c.views);
  r.integer("heldout_views", c.heldout_views);
  r.integer("width", c.width);
  r.integer("height", c.height);
  r.number("camera_distance", c.camera_distance);
  r.number("fov_x", c.fov_x);
  r.integer("samples_per_ray", c.samples_per_ray);
  r.boolean("stratified", c.stratified);
  r.integer("reference_samples", c.reference_samples);
  if (const json* s = r.find("scene")) read_scene(*s, c.scene);
  r.finish();
}

}  // namespace

TrainConfig config_from_json(const json& doc) {
  ObjectReader r(doc, "");
  // Defaults depend on the task, so it is read first.
  TaskKind task = TaskKind::kImage;
  r.enumeration("task", task, parse_task);
  TrainConfig c = default_config(task);
  if (const json* g = r.find("grid")) read_grid(*g, c.grid);
  r.integer("hidden_width", c.hidden_width);
  r.number("delta", c.delta);
  if (const json* q = r.find("quantizer"); q && !q->is_null()) {
    if (!q->is_string()) r.fail("quantizer", "must be a string or null");
    try {
      c.quantizer = parse_quantizer(q->get<std::string>());
    } catch (const ContractError& e) {
      r.fail("quantizer", e.what());
    }
  }
  r.enumeration("distribution", c.distribution, parse_distribution);
  r.number("mu_init", c.mu_init);
  r.number("b_init", c.b_init);
  if (const json* s = r.find("schedule")) read_schedule(*s, c.schedule);
  r.integer("iterations", c.iterations);
  r.integer("batch_size", c.batch_size);
  r.number("lr_features", c.lr_features);
  r.number("lr_mlp", c.lr_mlp);
  r.number("lr_distribution", c.lr_distribution);
  r.number("beta1", c.beta1);
  r.number("beta2", c.beta2);
  r.number("eps", c.eps);
  r.integer("seed", c.seed);
  r.boolean("feature_noise", c.feature_noise);
  r.boolean("rate_enabled", c.rate_enabled);
  r.integer("metrics_every", c.metrics_every);
  if (const json* i = r.find("image")) read_image(*i, c.image);
  if (const json* v = r.find("volume")) read_volume(*v, c.volume);
  r.finish();
  c.validate();
  return c;
}

json config_to_json(const TrainConfig& c) {
  json j;
  j["task"] = to_string(c.task);
  j["grid"] = {{"levels", c.grid.levels},
               {"log2_table_size", c.grid.log2_table_size},
               {"features_per_entry", c.grid.features_per_entry},
               {"n_min", c.grid.n_min},
               {"n_max", c.grid.n_max},
               {"dims", c.grid.dims}};
  j["hidden_width"] = c.hidden_width;
  j["delta"] = c.delta;
  j["quantizer"] = c.quantizer ? json(to_string(*c.quantizer)) : json(nullptr);
  j["distribution"] = to_string(c.distribution);
  j["mu_init"] = c.mu_init;
  j["b_init"] = c.b_init;
  j["schedule"] = {{"mode", to_string(c.schedule.mode)},
                   {"lambda", c.schedule.lambda},
                   {"lambda_bar", c.schedule.lambda_bar},
                   {"threshold", c.schedule.threshold}};
  j["iterations"] = c.iterations;
  j["batch_size"] = c.batch_size;
  j["lr_features"] = c.lr_features;
  j["lr_mlp"] = c.lr_mlp;
  j["lr_distribution"] = c.lr_distribution;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["seed"] = c.seed;
  j["feature_noise"] = c.feature_noise;
  j["rate_enabled"] = c.rate_enabled;
  j["metrics_every"] = c.metrics_every;
  j["image"] = {{"input", c.image.input},
                {"synthetic_width", c.image.synthetic_width},
                {"synthetic_height", c.image.synthetic_height},
                {"synthetic_seed", c.image.synthetic_seed}};
  const VolumeTaskConfig& v = c.volume;
  j["volume"] = {{"views", v.views},
                 {"heldout_views", v.heldout_views},
                 {"width", v.width},
                 {"height", v.height},
                 {"camera_distance", v.camera_distance},
                 {"fov_x", v.fov_x},
                 {"samples_per_ray", v.samples_per_ray},
                 {"stratified", v.stratified},
                 {"reference_samples", v.reference_samples},
                 {"scene",
                  {{"center", {v.scene.center.x(), v.scene.center.y(), v.scene.center.z()}},
                   {"radius", v.scene.radius},
                   {"density", v.scene.density}}}};
  return j;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

TrainConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path));
}

std::string git_blob_hash(std::span<const std::uint8_t> bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
    throw Error("SHA-1 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char b = digest[i];
    out += kHex[b >> 4];
    out += kHex[b & 15];
  }
  return out;
}

namespace {

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

void finalize_manifest(RunManifest& m) {
  std::string material = m.config.dump();
  for (const auto& [path, hash] : m.inputs) material += "\n" + path + " " + hash;
  m.input_hash = git_blob_hash(as_bytes(material));
}

json RunManifest::to_json() const {
  json j;
  j["manifest_version"] = 1;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["input_hash"] = input_hash;
  j["outputs"] = outputs;
  return j;
}

// --- sweep ------------------------------------------------------------------

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const SweepRow& r : rows) {
    out += std::string(to_string(r.dist)) + "," + std::string(to_string(r.mode)) + "," +
           fmt("%.10g", r.lambda) + ",";
    if (r.failed) {
      out += "failed,,,\n";
      continue;
    }
    out += fmt("%.10g", r.psnr_db) + "," + std::to_string(r.compressed_bytes) + "," +
           fmt("%.10g", r.rate_bits_per_feature) + "," + fmt("%.3f", r.train_seconds) + "\n";
  }
  return out;
}

std::string sweep_svg(const std::vector<SweepRow>& rows) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 170, kTop = 30, kBottom = 50;
  std::vector<const SweepRow*> ok;
  for (const SweepRow& r : rows)
    if (!r.failed && r.compressed_bytes > 0 && std::isfinite(r.psnr_db)) ok.push_back(&r);

  double x_lo = 1, x_hi = 10, y_lo = 0, y_hi = 1;
  if (!ok.empty()) {
    x_lo = y_lo = std::numeric_limits<double>::infinity();
    x_hi = y_hi = -std::numeric_limits<double>::infinity();
    for (const SweepRow* r : ok) {
      const double lx = std::log10(static_cast<double>(r->compressed_bytes));
      x_lo = std::min(x_lo, lx);
      x_hi = std::max(x_hi, lx);
      y_lo = std::min(y_lo, r->psnr_db);
      y_hi = std::max(y_hi, r->psnr_db);
    }
    x_lo = std::floor(x_lo);
    x_hi = std::max(std::ceil(x_hi), x_lo + 1);
    y_lo = std::floor(y_lo - 0.5);
    y_hi = std::ceil(y_hi + 0.5);
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double bytes) { return kLeft + (std::log10(bytes) - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double db) { return kTop + (y_hi - db) / (y_hi - y_lo) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\""
    << kTop + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kTop + ph << "\" stroke=\"black\"/>\n";
  for (double e = x_lo; e <= x_hi + 1e-9; e += 1.0) {
    const double x = px(std::pow(10.0, e));
    s << "<line x1=\"" << x << "\" y1=\"" << kTop + ph << "\" x2=\"" << x << "\" y2=\""
      << kTop + ph + 5 << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << x << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">1e"
      << static_cast<int>(e) << "</text>\n";
  }
  const double y_step = std::max(1.0, std::ceil((y_hi - y_lo) / 8.0));
  for (double v = y_lo; v <= y_hi + 1e-9; v += y_step) {
    const double y = py(v);
    s << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << v
      << "</text>\n";
  }
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10
    << "\" text-anchor=\"middle\">compressed size (bytes, log scale)</text>\n";
  s << "<text x=\"15\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 15 " << kTop + ph / 2
    << ")\" text-anchor=\"middle\">PSNR (dB)</text>\n";

  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#8c564b"};
  std::map<std::string, std::vector<const SweepRow*>> series;
  for (const SweepRow* r : ok)
    series[std::string(to_string(r->dist)) + " " + std::string(to_string(r->mode))].push_back(r);
  int idx = 0;
  for (auto& [name, pts] : series) {
    const char* color = kColors[idx % 6];
    std::sort(pts.begin(), pts.end(), [](const SweepRow* a, const SweepRow* b) {
      return a->compressed_bytes < b->compressed_bytes;
    });
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const SweepRow* r : pts)
      s << px(static_cast<double>(r->compressed_bytes)) << "," << py(r->psnr_db) << " ";
    s << "\"/>\n";
    for (const SweepRow* r : pts)
      s << "<circle cx=\"" << px(static_cast<double>(r->compressed_bytes)) << "\" cy=\""
        << py(r->psnr_db) << "\" r=\"3.5\" fill=\"" << color << "\"><title>lambda "
        << r->lambda << "</title></circle>\n";
    const double ly = kTop + 10 + 18 * idx;
    s << "<circle cx=\"" << kLeft + pw + 20 << "\" cy=\"" << ly << "\" r=\"4\" fill=\"" << color
      << "\"/>\n";
    s << "<text x=\"" << kLeft + pw + 30 << "\" y=\"" << ly + 4 << "\">" << name << "</text>\n";
    ++idx;
  }
  s << "</svg>\n";
  return s.str();
}

FieldModel quantized_model(const FieldModel& model, const QuantSpec& quant) {
  FieldModel out = model;
  out.features = quantize_table(model.features, quant);
  return out;
}

namespace {

struct SweepArtifacts {
  std::vector<std::uint8_t> checkpoint;
  std::vector<std::uint8_t> grid;
  std::string metrics;
};

SweepRow measure(const Task& task, const TrainConfig& config, SweepArtifacts* artifacts) {
  SweepRow row;
  row.dist = config.distribution;
  row.mode = config.schedule.mode;
  row.lambda = config.schedule.mode == LambdaMode::kAdaptive ? config.schedule.lambda_bar
                                                             : config.schedule.lambda;
  const TrainResult result = train(task, config);
  const QuantSpec quant = config.quant();
  std::vector<std::uint8_t> grid =
      export_grid_bytes(result.model.features, quant, result.model.distribution);
  const FieldModel decoded = quantized_model(result.model, quant);
  row.compressed_bytes = grid.size();
  row.psnr_db = task.evaluate_psnr(decoded);
  row.rate_bits_per_feature =
      rate_loss(decoded.features.values(), {}, result.model.distribution, config.delta, {})
          .bits_per_feature;
  row.train_seconds = result.seconds;
  if (artifacts) {
    artifacts->checkpoint = checkpoint_bytes(result.model);
    artifacts->grid = std::move(grid);
    std::ostringstream csv;
    write_metrics_csv(result.history, config.metrics_every, csv);
    artifacts->metrics = csv.str();
  }
  return row;
}

}  // namespace

SweepRow run_sweep_point(const Task& task, const TrainConfig& config) {
  return measure(task, config, nullptr);
}

int worker_limit() {
  if (const char* env = std::getenv("CAWA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw ContractError("CAWA_THREADS must be a positive integer, got '" + std::string(env) + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// --- commands ---------------------------------------------------------------

namespace {

// Flags that override config keys; names are kebab-case mirrors of the keys.
struct Override {
  const char* flag;
  const char* pointer;  // JSON pointer into the config document
  char kind;            // d double, i integer, s string, b bool
};

constexpr Override kOverrides[] = {
    {"task", "/task", 's'},
    {"input", "/image/input", 's'},
    {"synthetic-width", "/image/synthetic_width", 'i'},
    {"synthetic-height", "/image/synthetic_height", 'i'},
    {"synthetic-seed", "/image/synthetic_seed", 'i'},
    {"levels", "/grid/levels", 'i'},
    {"log2-table-size", "/grid/log2_table_size", 'i'},
    {"features-per-entry", "/grid/features_per_entry", 'i'},
    {"n-min", "/grid/n_min", 'i'},
    {"n-max", "/grid/n_max", 'i'},
    {"dims", "/grid/dims", 'i'},
    {"hidden-width", "/hidden_width", 'i'},
    {"delta", "/delta", 'd'},
    {"quantizer", "/quantizer", 's'},
    {"distribution", "/distribution", 's'},
    {"mu-init", "/mu_init", 'd'},
    {"b-init", "/b_init", 'd'},
    {"lambda-mode", "/schedule/mode", 's'},
    {"lambda", "/schedule/lambda", 'd'},
    {"lambda-bar", "/schedule/lambda_bar", 'd'},
    {"threshold", "/schedule/threshold", 'd'},
    {"iterations", "/iterations", 'i'},
    {"batch-size", "/batch_size", 'i'},
    {"lr-features", "/lr_features", 'd'},
    {"lr-mlp", "/lr_mlp", 'd'},
    {"lr-distribution", "/lr_distribution", 'd'},
    {"beta1", "/beta1", 'd'},
    {"beta2", "/beta2", 'd'},
    {"eps", "/eps", 'd'},
    {"seed", "/seed", 'i'},
    {"feature-noise", "/feature_noise", 'b'},
    {"rate-enabled", "/rate_enabled", 'b'},
    {"metrics-every", "/metrics_every", 'i'},
    {"views", "/volume/views", 'i'},
    {"heldout-views", "/volume/heldout_views", 'i'},
    {"view-width", "/volume/width", 'i'},
    {"view-height", "/volume/height", 'i'},
    {"samples-per-ray", "/volume/samples_per_ray", 'i'},
    {"reference-samples", "/volume/reference_samples", 'i'},
};

struct ConfigOptions {
  std::string config_path;
  std::string manifest_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app, bool with_manifest) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    if (with_manifest)
      app->add_option("--manifest", manifest_path, "reuse the config recorded in a manifest")
          ->check(CLI::ExistingFile);
    for (const Override& o : kOverrides)
      app->add_option(std::string("--") + o.flag, values[o.flag],
                      std::string("overrides config key ") + (o.pointer + 1));
  }

  json document(std::map<std::string, std::string>& inputs) const {
    json doc = json::object();
    if (!manifest_path.empty()) {
      const json m = read_json_file(manifest_path);
      if (!m.is_object() || !m.contains("config"))
        throw FormatError(manifest_path + ": not a run manifest");
      doc = m["config"];
      inputs[manifest_path] = git_blob_hash(read_file(manifest_path));
    }
    if (!config_path.empty()) {
      doc = read_json_file(config_path);
      inputs[config_path] = git_blob_hash(read_file(config_path));
    }
    for (const Override& o : kOverrides) {
      const std::string& v = values.at(o.flag);
      if (v.empty()) continue;
      const json::json_pointer ptr(o.pointer);
      try {
        switch (o.kind) {
          case 'd': doc[ptr] = std::stod(v); break;
          case 'i': doc[ptr] = std::stoll(v); break;
          case 'b':
            if (v != "true" && v != "false")
              throw ContractError("--" + std::string(o.flag) + " expects true or false");
            doc[ptr] = v == "true";
            break;
          default: doc[ptr] = v;
        }
      } catch (const std::logic_error&) {
        throw ContractError("--" + std::string(o.flag) + ": cannot parse '" + v + "'");
      }
    }
    return doc;
  }

  TrainConfig resolve(std::map<std::string, std::string>& inputs) const {
    TrainConfig c = config_from_json(document(inputs));
    if (c.task == TaskKind::kImage && !c.image.input.empty())
      inputs[c.image.input] = git_blob_hash(read_file(c.image.input));
    return c;
  }
};

void write_json(const std::filesystem::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<std::string> args_of(int argc, const char* const* argv) {
  std::vector<std::string> out;
  for (int i = 1; i < argc; ++i) out.emplace_back(argv[i]);
  return out;
}

void print_metrics(const StepMetrics& m) {
  std::fprintf(stderr, "step %lld  l_rgb %.6g  rate %.4f bits  lambda_eff %.4g  psnr %.3f dB\n",
               static_cast<long long>(m.step), m.l_rgb, m.rate_bits, m.lambda_eff, m.psnr);
}

// Compares the grid shape recorded in an artifact against the config.
void check_grid(const GridConfig& artifact, const GridConfig& task, const std::string& what) {
  std::string diff;
  auto field = [&](const char* name, long long a, long long b) {
    if (a == b) return;
    if (!diff.empty()) diff += ", ";
    diff += std::string(name) + " (" + what + " " + std::to_string(a) + ", task " +
            std::to_string(b) + ")";
  };
  field("dims", artifact.dims, task.dims);
  field("levels", artifact.levels, task.levels);
  field("features_per_entry", artifact.features_per_entry, task.features_per_entry);
  field("log2_table_size", artifact.log2_table_size, task.log2_table_size);
  field("n_min", artifact.n_min, task.n_min);
  field("n_max", artifact.n_max, task.n_max);
  if (!diff.empty()) throw ContractError(what + "/task mismatch: " + diff);
}

std::string lambda_tag(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

QuantSpec quant_for(const FieldModel& model, double delta, const std::string& quantizer) {
  QuantSpec q = QuantSpec::default_for(model.distribution.kind, delta);
  if (!quantizer.empty()) q.quantizer = parse_quantizer(quantizer);
  q.validate();
  return q;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"cawa: compression-aware feature-grid training"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // train
  ConfigOptions train_cfg;
  std::string train_out = "run";
  bool train_export = false, quiet = false;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write its artifacts");
  train_cfg.attach(train_cmd, true);
  train_cmd->add_option("--out", train_out, "output directory");
  train_cmd->add_flag("--export", train_export, "also write the compressed grid");
  train_cmd->add_flag("--quiet", quiet, "no progress output");

  // sweep
  ConfigOptions sweep_cfg;
  std::vector<std::string> lambda_text;
  std::vector<std::string> modes{"fixed"}, dists{"cauchy"};
  std::string sweep_out = "sweep";
  bool parallel = false;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "rate-distortion sweep over lambda values");
  sweep_cfg.attach(sweep_cmd, false);
  sweep_cmd->add_option("--lambdas", lambda_text, "comma-separated lambda (or lambda-bar) values")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--modes", modes, "fixed, adaptive, hybrid")->delimiter(',');
  sweep_cmd->add_option("--dists", dists, "laplace, cauchy")->delimiter(',');
  sweep_cmd->add_option("--out", sweep_out, "output directory");
  sweep_cmd->add_flag("--parallel", parallel, "run points concurrently (CAWA_THREADS caps workers)");
  sweep_cmd->add_flag("--quiet", quiet, "no progress output");

  // eval
  ConfigOptions eval_cfg;
  std::string eval_ckpt, eval_grid, eval_split = "heldout", eval_report;
  bool eval_quantized = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "report PSNR of a checkpoint or compressed grid");
  eval_cfg.attach(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--grid", eval_grid, "compressed grid replacing the checkpoint's features")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", eval_split, "heldout or train")
      ->check(CLI::IsMember({"heldout", "train"}));
  eval_cmd->add_flag("--quantized", eval_quantized, "quantize the checkpoint's features in memory");
  eval_cmd->add_option("--report", eval_report, "write a JSON report here");

  // hist
  std::string hist_ckpt, hist_out, hist_quantizer;
  double hist_delta = 0.15;
  CLI::App* hist_cmd = app.add_subcommand("hist", "histogram of quantization indices");
  hist_cmd->add_option("--checkpoint", hist_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  hist_cmd->add_option("--delta", hist_delta, "quantization step");
  hist_cmd->add_option("--quantizer", hist_quantizer, "mid_rise or mid_tread");
  hist_cmd->add_option("--out", hist_out, "CSV path (default stdout)");

  // export
  std::string exp_ckpt, exp_out, exp_quantizer;
  double exp_delta = 0.15;
  bool exp_clamp = false;
  CLI::App* export_cmd = app.add_subcommand("export", "write the compressed grid container");
  export_cmd->add_option("--checkpoint", exp_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", exp_out, "container path")->required();
  export_cmd->add_option("--delta", exp_delta, "quantization step");
  export_cmd->add_option("--quantizer", exp_quantizer, "mid_rise or mid_tread");
  export_cmd->add_flag("--clamp-overflow", exp_clamp, "saturate indices outside int16");

  // synth-image
  int synth_w = 64, synth_h = 64;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  CLI::App* synth_cmd = app.add_subcommand("synth-image", "write the synthetic test card as PPM");
  synth_cmd->add_option("--width", synth_w)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--height", synth_h)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed);
  synth_cmd->add_option("--out", synth_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::vector<std::string> args = args_of(argc, argv);
  try {
    if (*train_cmd) {
      RunManifest manifest;
      manifest.command = "train";
      manifest.argv = args;
      const TrainConfig config = train_cfg.resolve(manifest.inputs);
      manifest.config = config_to_json(config);
      manifest.seed = config.seed;
      const auto task = make_task(config);
      ProgressFn progress;
      if (!quiet) progress = print_metrics;
      const TrainResult result = train(*task, config, progress);

      const std::filesystem::path dir(train_out);
      ensure_dir(dir);
      save_checkpoint(result.model, dir / "checkpoint.cawc");
      std::ostringstream csv;
      write_metrics_csv(result.history, config.metrics_every, csv);
      write_file_atomic(dir / "metrics.csv", csv.str());
      manifest.outputs["checkpoint"] = (dir / "checkpoint.cawc").string();
      manifest.outputs["metrics"] = (dir / "metrics.csv").string();
      if (train_export) {
        write_file_atomic(dir / "grid.cawf",
                          export_grid_bytes(result.model.features, config.quant(),
                                            result.model.distribution));
        manifest.outputs["grid"] = (dir / "grid.cawf").string();
      }
      manifest.outputs["manifest"] = (dir / "manifest.json").string();
      finalize_manifest(manifest);
      write_json(dir / "manifest.json", manifest.to_json());
      std::printf("final held-out psnr %.4f dB, %.1f s\n", result.final_psnr, result.seconds);
      return kExitOk;
    }

    if (*sweep_cmd) {
      // CLI11 reads an empty argument as one empty element, so validate here.
      std::vector<double> lambdas;
      for (const std::string& t : lambda_text) {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(t, &used);
        } catch (const std::logic_error&) {
          used = 0;
        }
        if (t.empty() || used != t.size())
          throw ContractError("--lambdas: cannot parse '" + t + "'");
        lambdas.push_back(v);
      }
      if (lambdas.empty()) throw ContractError("sweep needs at least one lambda value");
      RunManifest manifest;
      manifest.command = "sweep";
      manifest.argv = args;
      const TrainConfig base = sweep_cfg.resolve(manifest.inputs);
      manifest.config = config_to_json(base);
      manifest.seed = base.seed;

      std::vector<TrainConfig> points;
      for (const std::string& d : dists)
        for (const std::string& m : modes)
          for (double lambda : lambdas) {
            TrainConfig c = base;
            c.distribution = parse_distribution(d);
            c.quantizer.reset();
            c.schedule.mode = parse_lambda_mode(m);
            if (c.schedule.mode == LambdaMode::kAdaptive)
              c.schedule.lambda_bar = lambda;
            else
              c.schedule.lambda = lambda;
            c.validate();
            points.push_back(c);
          }
      const auto task = make_task(base);
      const std::filesystem::path dir(sweep_out);
      ensure_dir(dir);

      std::vector<SweepRow> rows(points.size());
      std::vector<SweepArtifacts> artifacts(points.size());
      std::mutex log_mutex;
      auto run_point = [&](std::size_t i) {
        const TrainConfig& c = points[i];
        try {
          rows[i] = measure(*task, c, &artifacts[i]);
        } catch (const std::exception& e) {
          rows[i].dist = c.distribution;
          rows[i].mode = c.schedule.mode;
          rows[i].lambda =
              c.schedule.mode == LambdaMode::kAdaptive ? c.schedule.lambda_bar : c.schedule.lambda;
          rows[i].failed = true;
          rows[i].error = e.what();
        }
        if (!quiet) {
          std::lock_guard lock(log_mutex);
          const SweepRow& r = rows[i];
          if (r.failed)
            std::fprintf(stderr, "%s %s %g: failed: %s\n", to_string(r.dist).data(),
                         to_string(r.mode).data(), r.lambda, r.error.c_str());
          else
            std::fprintf(stderr, "%s %s %g: %.3f dB, %zu bytes, %.1f s\n",
                         to_string(r.dist).data(), to_string(r.mode).data(), r.lambda, r.psnr_db,
                         r.compressed_bytes, r.train_seconds);
        }
      };
      const int workers = parallel ? std::min<int>(worker_limit(), static_cast<int>(points.size())) : 1;
      if (workers <= 1) {
        for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
      } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
          pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < points.size();) run_point(i);
          });
        for (std::thread& t : pool) t.join();
      }

      for (std::size_t i = 0; i < points.size(); ++i) {
        if (rows[i].failed) continue;
        const std::string name = std::string(to_string(rows[i].dist)) + "_" +
                                 std::string(to_string(rows[i].mode)) + "_" +
                                 lambda_tag(rows[i].lambda);
        const std::filesystem::path sub = dir / name;
        ensure_dir(sub);
        write_file_atomic(sub / "checkpoint.cawc", artifacts[i].checkpoint);
        write_file_atomic(sub / "grid.cawf", artifacts[i].grid);
        write_file_atomic(sub / "metrics.csv", artifacts[i].metrics);
        manifest.outputs[name] = sub.string();
      }
      write_file_atomic(dir / "sweep.csv", sweep_csv(rows));
      write_file_atomic(dir / "sweep.svg", sweep_svg(rows));
      manifest.outputs["csv"] = (dir / "sweep.csv").string();
      manifest.outputs["svg"] = (dir / "sweep.svg").string();
      finalize_manifest(manifest);
      write_json(dir / "manifest.json", manifest.to_json());
      std::fputs(sweep_csv(rows).c_str(), stdout);
      return std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.failed; })
                 ? kExitNumeric
                 : kExitOk;
    }

    if (*eval_cmd) {
      std::map<std::string, std::string> inputs;
      const TrainConfig config = eval_cfg.resolve(inputs);
      FieldModel model = load_checkpoint(eval_ckpt);
      check_grid(model.features.config(), config.grid, "checkpoint");
      std::string source = "checkpoint";
      if (!eval_grid.empty()) {
        ImportedGrid grid = import_grid(read_file(eval_grid));
        check_grid(grid.table.config(), config.grid, "grid");
        model.features = std::move(grid.table);
        model.distribution = grid.params;
        source = "grid";
      } else if (eval_quantized) {
        model = quantized_model(model, config.quant());
        source = "quantized checkpoint";
      }
      const auto task = make_task(config);
      task->check_model(model);
      const double value =
          eval_split == "train" ? task->train_psnr(model) : task->evaluate_psnr(model);
      std::printf("psnr_db %.10g\n", value);
      if (!eval_report.empty())
        write_json(eval_report, json{{"source", source},
                                     {"split", eval_split},
                                     {"psnr_db", value},
                                     {"checkpoint", eval_ckpt},
                                     {"grid", eval_grid}});
      return kExitOk;
    }

    if (*hist_cmd) {
      const FieldModel model = load_checkpoint(hist_ckpt);
      const QuantSpec quant = quant_for(model, hist_delta, hist_quantizer);
      const Histogram hist = histogram(model.features, quant);
      std::ostringstream csv;
      write_histogram_csv(hist, csv);
      if (hist_out.empty())
        std::fputs(csv.str().c_str(), stdout);
      else
        write_file_atomic(hist_out, csv.str());
      std::fprintf(stderr, "bins %zu, mode share %.4f\n", hist.size(), mode_share(hist));
      return kExitOk;
    }

    if (*export_cmd) {
      const FieldModel model = load_checkpoint(exp_ckpt);
      const QuantSpec quant = quant_for(model, exp_delta, exp_quantizer);
      ExportReport report;
      const auto bytes = export_grid_bytes(model.features, quant, model.distribution,
                                           ExportOptions{exp_clamp}, &report);
      write_file_atomic(exp_out, bytes);
      std::printf("wrote %zu bytes (payload %zu, clamped %zu)\n", report.bytes,
                  report.payload_bytes, report.clamped);
      return kExitOk;
    }

    if (*synth_cmd) {
      write_ppm(synthetic_image(synth_w, synth_h, synth_seed), synth_out);
      return kExitOk;
    }
  } catch (const ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const InputDomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kExitIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const IndexOverflowError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace cawa
