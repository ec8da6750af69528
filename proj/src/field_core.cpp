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

#include "cawa/field_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cawa/error.hpp"
#include "cawa/rng.hpp"

namespace cawa {

void GridConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw ContractError("invalid grid config: " + what);
  };
  if (levels < 1 || levels > 255) fail("levels must be in [1, 255]");
  if (log2_table_size < 1 || log2_table_size > 30)
    fail("log2_table_size must be in [1, 30]");
  if (features_per_entry < 1 || features_per_entry > 255)
    fail("features_per_entry must be in [1, 255]");
  if (n_min < 1) fail("n_min must be >= 1");
  if (n_max < n_min) fail("n_max must be >= n_min");
  if (dims != 2 && dims != 3) fail("dims must be 2 or 3");
  const double g = growth_factor();
  if (!std::isfinite(g) || g < 1.0) fail("growth factor must be finite and >= 1");
}

double GridConfig::growth_factor() const {
  if (levels == 1) return 1.0;
  return std::exp((std::log(static_cast<double>(n_max)) -
                   std::log(static_cast<double>(n_min))) /
                  (levels - 1));
}

std::vector<int> level_resolutions(const GridConfig& config) {
  config.validate();
  const double log_g = std::log(config.growth_factor());
  std::vector<int> out(config.levels);
  for (int l = 0; l < config.levels; ++l) {
    const double n = config.n_min * std::exp(l * log_g);
    // Guard against exp/log round-off pushing exact integers just below.
    out[l] = static_cast<int>(std::floor(n * (1.0 + 1e-9)));
  }
  out[0] = config.n_min;
  return out;
}

namespace {

// (N + 1)^d, saturated just above table_size.
std::size_t lattice_size(int resolution, int dims, std::size_t table_size) {
  std::size_t lattice = 1;
  for (int k = 0; k < dims; ++k) {
    lattice *= static_cast<std::size_t>(resolution) + 1;
    if (lattice > table_size) return table_size + 1;
  }
  return lattice;
}

}  // namespace

std::size_t level_entry_count(int resolution, int dims, std::size_t table_size) {
  return std::min(lattice_size(resolution, dims, table_size), table_size);
}

std::uint32_t spatial_hash(std::span<const std::uint32_t> corner,
                           int resolution, int dims, std::size_t table_size) {
  if (static_cast<int>(corner.size()) != dims)
    throw ContractError("corner arity does not match grid dimension");
  for (std::uint32_t c : corner) {
    if (c > static_cast<std::uint32_t>(resolution))
      throw InputDomainError("corner coordinate " + std::to_string(c) +
                             " outside [0, " + std::to_string(resolution) + "]");
  }
  const std::size_t side = static_cast<std::size_t>(resolution) + 1;
  if (lattice_size(resolution, dims, table_size) <= table_size) {
    std::size_t index = 0;
    for (int k = dims - 1; k >= 0; --k) index = index * side + corner[k];
    return static_cast<std::uint32_t>(index);
  }
  std::uint32_t h = 0;
  for (int k = 0; k < dims; ++k) h ^= corner[k] * kHashPrimes[k];
  return static_cast<std::uint32_t>(h % table_size);
}

FeatureTable::FeatureTable(const GridConfig& config) : config_(config) {
  resolutions_ = level_resolutions(config);
  const std::size_t t = config.table_size();
  std::size_t total = 0;
  for (int l = 0; l < config.levels; ++l) {
    entries_.push_back(level_entry_count(resolutions_[l], config.dims, t));
    offsets_.push_back(total);
    total += entries_.back() * config.features_per_entry;
  }
  values_.assign(total, 0.0);
}

bool FeatureTable::hashed(int level) const {
  const std::size_t t = config_.table_size();
  return lattice_size(resolutions_[level], config_.dims, t) > t;
}

std::span<double> FeatureTable::level_values(int level) {
  return std::span<double>(values_).subspan(offsets_[level],
                                            entries_[level] * features());
}

std::span<const double> FeatureTable::level_values(int level) const {
  return std::span<const double>(values_).subspan(offsets_[level],
                                                  entries_[level] * features());
}

bool FeatureTable::same_shape(const FeatureTable& other) const {
  return config_ == other.config_ && values_.size() == other.values_.size();
}

FeatureTable init_table(const GridConfig& config, std::uint64_t seed) {
  FeatureTable table(config);
  Rng rng(seed, Stream::kTableInit);
  for (double& v : table.values()) v = rng.uniform(-kInitRange, kInitRange);
  return table;
}

EncodeTrace::EncodeTrace(const GridConfig& config)
    : levels_(config.levels),
      corners_(1 << config.dims),
      features_(config.features_per_entry),
      indices_(static_cast<std::size_t>(levels_) * corners_),
      weights_(static_cast<std::size_t>(levels_) * corners_),
      output_(static_cast<std::size_t>(levels_) * features_) {}

void encode(std::span<const double> x, const FeatureTable& table,
            EncodeTrace& trace) {
  const int d = table.dims();
  const int f_count = table.features();
  if (static_cast<int>(x.size()) != d)
    throw ContractError("position arity does not match grid dimension");
  for (double v : x) {
    if (!std::isfinite(v))
      throw InputDomainError("encode: non-finite position component");
    if (v < 0.0 || v > 1.0)
      throw InputDomainError("encode: position outside the unit cube");
  }
  if (trace.levels_ != table.levels() || trace.corners_ != (1 << d) ||
      trace.features_ != f_count)
    trace = EncodeTrace(table.config());

  const std::size_t t = table.config().table_size();
  const int corners = 1 << d;
  std::array<std::uint32_t, 3> cell{};
  std::array<double, 3> frac{};
  std::array<std::uint32_t, 3> corner{};

  for (int l = 0; l < table.levels(); ++l) {
    const int n = table.resolution(l);
    for (int k = 0; k < d; ++k) {
      const double p = x[k] * n;
      int i = static_cast<int>(std::floor(p));
      if (i >= n) i = n - 1;
      cell[k] = static_cast<std::uint32_t>(i);
      frac[k] = p - i;
    }
    std::uint32_t* idx = trace.indices_.data() + l * corners;
    double* w = trace.weights_.data() + l * corners;
    double* out = trace.output_.data() + l * f_count;
    std::fill(out, out + f_count, 0.0);
    const double* level = table.level_values(l).data();
    for (int c = 0; c < corners; ++c) {
      double weight = 1.0;
      for (int k = 0; k < d; ++k) {
        const bool upper = (c >> k) & 1;
        corner[k] = cell[k] + (upper ? 1u : 0u);
        weight *= upper ? frac[k] : 1.0 - frac[k];
      }
      idx[c] = spatial_hash(std::span<const std::uint32_t>(corner.data(), d), n,
                            d, t);
      w[c] = weight;
      const double* row = level + static_cast<std::size_t>(idx[c]) * f_count;
      for (int f = 0; f < f_count; ++f) out[f] += weight * row[f];
    }
  }
}

EncodeTrace encode(std::span<const double> x, const FeatureTable& table) {
  EncodeTrace trace(table.config());
  encode(x, table, trace);
  return trace;
}

void encode_backward(const EncodeTrace& trace, std::span<const double> grad_y,
                     FeatureTable& grad_table) {
  const int f_count = grad_table.features();
  if (trace.levels() != grad_table.levels() || trace.features() != f_count ||
      trace.corners() != (1 << grad_table.dims()))
    throw ContractError("encode_backward: trace does not match gradient table");
  if (grad_y.size() != static_cast<std::size_t>(trace.levels() * f_count))
    throw ContractError("encode_backward: grad_y has wrong length");
  for (int l = 0; l < trace.levels(); ++l) {
    const auto idx = trace.indices(l);
    const auto w = trace.weights(l);
    const double* g = grad_y.data() + l * f_count;
    double* level = grad_table.level_values(l).data();
    for (int c = 0; c < trace.corners(); ++c) {
      double* row = level + static_cast<std::size_t>(idx[c]) * f_count;
      for (int f = 0; f < f_count; ++f) row[f] += w[c] * g[f];
    }
  }
}

}  // namespace cawa
