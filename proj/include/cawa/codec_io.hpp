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
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "cawa/entropy_model.hpp"
#include "cawa/field_core.hpp"

namespace cawa {

// CompressedGrid container, version 1. All integers little-endian.
//
//   offset  size  field
//   0       4     magic "CAWF"
//   4       2     version (u16) = 1
//   6       1     dims d
//   7       1     levels L
//   8       1     features per entry F
//   9       1     log2 table size
//   10      1     distribution (0 Laplace, 1 Cauchy)
//   11      1     quantizer (0 mid-rise, 1 mid-tread)
//   12      4     n_min (u32)
//   16      4     n_max (u32)
//   20      4     delta (f32)
//   24      4     mu (f32)
//   28      4     b, the distribution scale (f32)
//   32      4L    entry count of each level (u32)
//   32+4L   ...   raw DEFLATE stream (RFC 1951) of every quantized index as
//                 i16, level-major, then entry-major, then feature-major
inline constexpr char kGridMagic[4] = {'C', 'A', 'W', 'F'};
inline constexpr std::uint16_t kGridVersion = 1;

struct ExportOptions {
  // Saturate out-of-range indices to the i16 limits (counted in the report)
  // instead of failing with IndexOverflowError.
  bool clamp_overflow = false;
};

struct ExportReport {
  std::size_t bytes = 0;          // whole container
  std::size_t payload_bytes = 0;  // DEFLATE stream only
  std::size_t clamped = 0;
};

ExportReport export_grid(const FeatureTable& table, const QuantSpec& quant,
                         const DistributionParams& params, std::ostream& sink,
                         const ExportOptions& options = {});
std::vector<std::uint8_t> export_grid_bytes(const FeatureTable& table,
                                            const QuantSpec& quant,
                                            const DistributionParams& params,
                                            const ExportOptions& options = {},
                                            ExportReport* report = nullptr);

struct ImportedGrid {
  FeatureTable table;  // dequantized values
  DistributionParams params;
  QuantSpec quant;
};

ImportedGrid import_grid(std::istream& source);
ImportedGrid import_grid(std::span<const std::uint8_t> bytes);

// Quantization indices of every stored value, in storage order.
std::vector<std::int64_t> quantize_indices(const FeatureTable& table,
                                           const QuantSpec& quant);

// The table as the decoder will see it: every value replaced by its
// reconstruction level in 32-bit storage.
FeatureTable quantize_table(const FeatureTable& table, const QuantSpec& quant);

using Histogram = std::map<std::int64_t, std::uint64_t>;

Histogram histogram(const FeatureTable& table, const QuantSpec& quant);

// Fraction of all values that fall in the most populated bin.
double mode_share(const Histogram& hist);

// "k,count" rows in increasing k, preceded by the header line.
void write_histogram_csv(const Histogram& hist, std::ostream& out);

// Raw DEFLATE helpers (exposed for tests).
std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> raw);
std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> compressed,
                                        std::size_t expected_size);

}  // namespace cawa
