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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cawa {

// Shape of the multi-resolution feature grid.
struct GridConfig {
  int levels = 16;
  int log2_table_size = 19;
  int features_per_entry = 2;
  int n_min = 16;
  int n_max = 2048;
  int dims = 3;

  // Throws ContractError when any invariant is violated.
  void validate() const;

  std::size_t table_size() const { return std::size_t{1} << log2_table_size; }

  // Geometric growth between consecutive level resolutions; 1 for L = 1.
  double growth_factor() const;

  int output_width() const { return levels * features_per_entry; }

  bool operator==(const GridConfig&) const = default;
};

// Resolution N_l (cells per axis) of every level, coarsest first.
std::vector<int> level_resolutions(const GridConfig& config);

// Number of table rows used by a level: min(T, (N + 1)^d).
std::size_t level_entry_count(int resolution, int dims, std::size_t table_size);

// Maps integer corner coordinates (each in [0, resolution]) to a row of the
// level's table. Levels whose full lattice fits in T rows are addressed
// densely with the first coordinate varying fastest; larger levels use the
// prime-XOR hash modulo T.
std::uint32_t spatial_hash(std::span<const std::uint32_t> corner,
                           int resolution, int dims, std::size_t table_size);

inline constexpr std::array<std::uint32_t, 3> kHashPrimes = {
    1u, 2654435761u, 805459861u};

// Trainable feature storage. Values are laid out level-major, then
// entry-major, then feature-major, which is also the export order.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(const GridConfig& config);

  const GridConfig& config() const { return config_; }
  int levels() const { return config_.levels; }
  int features() const { return config_.features_per_entry; }
  int dims() const { return config_.dims; }

  int resolution(int level) const { return resolutions_[level]; }
  std::size_t entries(int level) const { return entries_[level]; }
  bool hashed(int level) const;
  // Offset of the level's first value inside values().
  std::size_t offset(int level) const { return offsets_[level]; }

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> level_values(int level);
  std::span<const double> level_values(int level) const;

  double& at(int level, std::size_t entry, int feature) {
    return values_[offsets_[level] + entry * features() + feature];
  }
  double at(int level, std::size_t entry, int feature) const {
    return values_[offsets_[level] + entry * features() + feature];
  }

  bool same_shape(const FeatureTable& other) const;

 private:
  GridConfig config_;
  std::vector<int> resolutions_;
  std::vector<std::size_t> entries_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

// i.i.d. uniform values in [-1e-4, 1e-4].
FeatureTable init_table(const GridConfig& config, std::uint64_t seed);

inline constexpr double kInitRange = 1e-4;

// Per-level corner rows and d-linear weights recorded by encode(), plus the
// interpolated output. Capacity is fixed at construction so a trace can be
// reused across calls without reallocating.
class EncodeTrace {
 public:
  EncodeTrace() = default;
  explicit EncodeTrace(const GridConfig& config);

  int levels() const { return levels_; }
  int corners() const { return corners_; }
  int features() const { return features_; }

  std::span<const std::uint32_t> indices(int level) const {
    return {indices_.data() + level * corners_, static_cast<std::size_t>(corners_)};
  }
  std::span<const double> weights(int level) const {
    return {weights_.data() + level * corners_, static_cast<std::size_t>(corners_)};
  }
  std::span<const double> output() const { return output_; }
  std::span<const double> output(int level) const {
    return {output_.data() + level * features_, static_cast<std::size_t>(features_)};
  }

 private:
  friend void encode(std::span<const double>, const FeatureTable&, EncodeTrace&);

  int levels_ = 0;
  int corners_ = 0;
  int features_ = 0;
  std::vector<std::uint32_t> indices_;
  std::vector<double> weights_;
  std::vector<double> output_;
};

// Interpolates the L*F feature vector at x in [0,1]^d.
void encode(std::span<const double> x, const FeatureTable& table,
            EncodeTrace& trace);
EncodeTrace encode(std::span<const double> x, const FeatureTable& table);

// Scatters weight * grad_y into grad_table at each traced corner. Adds into
// the accumulator; never overwrites.
void encode_backward(const EncodeTrace& trace, std::span<const double> grad_y,
                     FeatureTable& grad_table);

}  // namespace cawa
