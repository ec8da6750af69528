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

// Command-line surface: config ingestion, run manifests and the cawa tool.

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cawa/trainer.hpp"

namespace cawa {

// Strict JSON <-> TrainConfig mapping. Keys mirror the TrainConfig fields in
// lower_snake_case with nested objects for grid, schedule, image, volume and
// volume.scene. Unknown keys and mistyped values raise ContractError naming
// the dotted key path. Missing keys keep their defaults.
TrainConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig load_config(const std::filesystem::path& path);

// SHA-1 of the git blob object for `bytes`, lower-case hex.
std::string git_blob_hash(std::span<const std::uint8_t> bytes);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;       // arguments after the program name
  nlohmann::json config;               // full resolved config
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> blob hash
  std::string input_hash;              // hash over config + inputs
  std::map<std::string, std::string> outputs;  // role -> path

  nlohmann::json to_json() const;
};

// Fills input_hash from config and inputs.
void finalize_manifest(RunManifest& manifest);

// One point of a rate-distortion sweep.
struct SweepRow {
  DistributionKind dist = DistributionKind::kCauchy;
  LambdaMode mode = LambdaMode::kFixed;
  double lambda = 0.0;
  bool failed = false;
  std::string error;
  double psnr_db = 0.0;
  std::size_t compressed_bytes = 0;
  double rate_bits_per_feature = 0.0;
  double train_seconds = 0.0;
};

inline constexpr const char* kSweepHeader =
    "dist,mode,lambda,psnr_db,compressed_bytes,rate_bits_per_feature,train_seconds";

std::string sweep_csv(const std::vector<SweepRow>& rows);
// Size-vs-PSNR scatter with a log-scaled size axis; one polyline per
// (dist, mode) series.
std::string sweep_svg(const std::vector<SweepRow>& rows);

// Evaluates the decoded model: features replaced by their quantized
// reconstruction.
FieldModel quantized_model(const FieldModel& model, const QuantSpec& quant);

// Trains one sweep point and measures it on the decoded model.
SweepRow run_sweep_point(const Task& task, const TrainConfig& config);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

// Worker cap from CAWA_THREADS (default: hardware concurrency, at least 1).
int worker_limit();

int run_cli(int argc, const char* const* argv);

}  // namespace cawa
