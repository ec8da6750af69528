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

#include "cawa/codec_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <string>

#include "cawa/error.hpp"

namespace cawa {

namespace {

static_assert(std::endian::native == std::endian::little,
              "container writer assumes a little-endian host");

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    const auto b = take(4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("grid container: truncated header");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> raw) {
  z_stream zs{};
  // Level 9 spends seconds on long match chains in the small-alphabet index
  // stream for under 10% smaller output; the default level is fast.
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 9, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error("deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(raw.size())));
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("deflate did not finish");
  out.resize(produced);
  return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> compressed,
                                        std::size_t expected_size) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw Error("inflateInit2 failed");
  // One spare byte detects streams that decode to more than expected.
  std::vector<std::uint8_t> out(expected_size + 1);
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  const std::size_t unread = zs.avail_in;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw FormatError("grid container: payload is truncated or corrupt");
  if (produced != expected_size)
    throw FormatError("grid container: payload holds " + std::to_string(produced) +
                      " bytes, expected " + std::to_string(expected_size));
  if (unread != 0) throw FormatError("grid container: trailing bytes after payload");
  out.resize(produced);
  return out;
}

std::vector<std::int64_t> quantize_indices(const FeatureTable& table,
                                           const QuantSpec& quant) {
  quant.validate();
  std::vector<std::int64_t> k(table.size());
  const auto values = table.values();
  for (std::size_t i = 0; i < values.size(); ++i) k[i] = quantize(values[i], quant).index;
  return k;
}

FeatureTable quantize_table(const FeatureTable& table, const QuantSpec& quant) {
  FeatureTable out = table;
  const float delta = static_cast<float>(quant.delta);
  auto values = out.values();
  for (double& v : values)
    v = dequantize(quantize(v, quant).index, delta, quant.quantizer);
  return out;
}

std::vector<std::uint8_t> export_grid_bytes(const FeatureTable& table,
                                            const QuantSpec& quant,
                                            const DistributionParams& params,
                                            const ExportOptions& options,
                                            ExportReport* report) {
  const GridConfig& cfg = table.config();
  cfg.validate();
  quant.validate();

  const std::vector<std::int64_t> k = quantize_indices(table, quant);
  std::vector<std::uint8_t> raw(k.size() * 2);
  std::size_t overflow = 0;
  constexpr std::int64_t lo = std::numeric_limits<std::int16_t>::min();
  constexpr std::int64_t hi = std::numeric_limits<std::int16_t>::max();
  for (std::size_t i = 0; i < k.size(); ++i) {
    std::int64_t v = k[i];
    if (v < lo || v > hi) {
      ++overflow;
      v = std::clamp(v, lo, hi);
    }
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
    raw[2 * i] = static_cast<std::uint8_t>(u);
    raw[2 * i + 1] = static_cast<std::uint8_t>(u >> 8);
  }
  if (overflow > 0 && !options.clamp_overflow) throw IndexOverflowError(overflow);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kGridMagic), std::end(kGridMagic));
  put_u16(out, kGridVersion);
  put_u8(out, static_cast<std::uint8_t>(cfg.dims));
  put_u8(out, static_cast<std::uint8_t>(cfg.levels));
  put_u8(out, static_cast<std::uint8_t>(cfg.features_per_entry));
  put_u8(out, static_cast<std::uint8_t>(cfg.log2_table_size));
  put_u8(out, static_cast<std::uint8_t>(params.kind));
  put_u8(out, static_cast<std::uint8_t>(quant.quantizer));
  put_u32(out, static_cast<std::uint32_t>(cfg.n_min));
  put_u32(out, static_cast<std::uint32_t>(cfg.n_max));
  put_f32(out, static_cast<float>(quant.delta));
  put_f32(out, static_cast<float>(params.mu));
  put_f32(out, static_cast<float>(params.scale()));
  for (int l = 0; l < table.levels(); ++l)
    put_u32(out, static_cast<std::uint32_t>(table.entries(l)));
  const std::size_t header = out.size();
  const std::vector<std::uint8_t> payload = deflate_bytes(raw);
  out.insert(out.end(), payload.begin(), payload.end());

  if (report != nullptr) {
    report->bytes = out.size();
    report->payload_bytes = out.size() - header;
    report->clamped = overflow;
  }
  return out;
}

ExportReport export_grid(const FeatureTable& table, const QuantSpec& quant,
                         const DistributionParams& params, std::ostream& sink,
                         const ExportOptions& options) {
  ExportReport report;
  const auto bytes = export_grid_bytes(table, quant, params, options, &report);
  sink.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw IoError("failed writing grid container");
  return report;
}

ImportedGrid import_grid(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kGridMagic)))
    throw FormatError("grid container: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kGridVersion)
    throw FormatError("grid container: unsupported version " + std::to_string(version));

  GridConfig cfg;
  cfg.dims = r.u8();
  cfg.levels = r.u8();
  cfg.features_per_entry = r.u8();
  cfg.log2_table_size = r.u8();
  const std::uint8_t dist = r.u8();
  const std::uint8_t quantizer = r.u8();
  cfg.n_min = static_cast<int>(r.u32());
  cfg.n_max = static_cast<int>(r.u32());
  const float delta = r.f32();
  const float mu = r.f32();
  const float b = r.f32();
  if (dist > 1 || quantizer > 1) throw FormatError("grid container: bad enum field");
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("grid container: ") + e.what());
  }
  if (!(delta > 0.0f) || !std::isfinite(delta) || !(b > 0.0f) || !std::isfinite(mu))
    throw FormatError("grid container: bad quantizer/distribution parameters");

  ImportedGrid out{FeatureTable(cfg), {}, {}};
  for (int l = 0; l < cfg.levels; ++l) {
    if (r.u32() != out.table.entries(l))
      throw FormatError("grid container: level " + std::to_string(l) +
                        " entry count does not match the grid shape");
  }
  out.params = DistributionParams::from_scale(static_cast<DistributionKind>(dist), mu, b);
  out.quant = {static_cast<double>(delta), static_cast<Quantizer>(quantizer)};

  const std::vector<std::uint8_t> raw = inflate_bytes(r.rest(), out.table.size() * 2);
  auto values = out.table.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
    values[i] = dequantize(static_cast<std::int16_t>(u), delta, out.quant.quantizer);
  }
  return out;
}

ImportedGrid import_grid(std::istream& source) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)),
                                  std::istreambuf_iterator<char>());
  return import_grid(bytes);
}

Histogram histogram(const FeatureTable& table, const QuantSpec& quant) {
  Histogram h;
  for (std::int64_t k : quantize_indices(table, quant)) ++h[k];
  return h;
}

double mode_share(const Histogram& hist) {
  std::uint64_t total = 0, best = 0;
  for (const auto& [k, n] : hist) {
    total += n;
    best = std::max(best, n);
  }
  return total == 0 ? 0.0 : static_cast<double>(best) / static_cast<double>(total);
}

void write_histogram_csv(const Histogram& hist, std::ostream& out) {
  out << "k,count\n";
  for (const auto& [k, n] : hist) out << k << ',' << n << '\n';
}

}  // namespace cawa
