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
#include <random>

namespace cawa {

// Independent random streams derived from one run seed. Every consumer of
// randomness draws from its own stream so that enabling one feature (say the
// rate term) never shifts the samples another feature sees.
enum class Stream : std::uint64_t {
  kTableInit = 1,
  kMlpInit = 2,
  kBatch = 3,
  kFeatureNoise = 4,
  kRateNoise = 5,
  kJitter = 6,
  kSynthetic = 7,
};

// Thin wrapper over mt19937_64. The engine output sequence is fixed by the
// standard; the mappings to real/integer ranges below are ours, so results
// do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng(seed, 0, 0) {}

  Rng(std::uint64_t seed, Stream stream, std::uint64_t step = 0)
      : Rng(seed, static_cast<std::uint64_t>(stream), step) {}

  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(step),
                      static_cast<std::uint32_t>(step >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0. Rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cawa
