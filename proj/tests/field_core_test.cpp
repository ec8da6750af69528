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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "cawa/error.hpp"
#include "cawa/rng.hpp"

namespace cawa {
namespace {

GridConfig Small2d() { return GridConfig{3, 6, 2, 2, 16, 2}; }
GridConfig Small3d() { return GridConfig{3, 8, 2, 2, 12, 3}; }

FeatureTable RandomTable(const GridConfig& config, std::uint64_t seed) {
  FeatureTable table(config);
  Rng rng(seed);
  for (double& v : table.values()) v = rng.uniform(-1.0, 1.0);
  return table;
}

TEST(GridConfigTest, RejectsInvalid) {
  EXPECT_THROW((GridConfig{0, 10, 2, 16, 32, 2}.validate()), ContractError);
  EXPECT_THROW((GridConfig{2, 10, 0, 16, 32, 2}.validate()), ContractError);
  EXPECT_THROW((GridConfig{2, 10, 2, 0, 32, 2}.validate()), ContractError);
  EXPECT_THROW((GridConfig{2, 10, 2, 64, 32, 2}.validate()), ContractError);
  EXPECT_THROW((GridConfig{2, 10, 2, 16, 32, 4}.validate()), ContractError);
  EXPECT_NO_THROW((GridConfig{2, 10, 2, 16, 32, 3}.validate()));
}

TEST(LevelResolutionsTest, TableOneDefaults) {
  const GridConfig config{16, 19, 2, 16, 2048, 3};
  EXPECT_NEAR(config.growth_factor(), 1.3819128799677760, 1e-12);
  const std::vector<int> expected = {16,  22,  30,  42,  58,  80,   111,  153,
                                     212, 294, 406, 561, 776, 1072, 1482, 2048};
  EXPECT_EQ(level_resolutions(config), expected);
}

TEST(LevelResolutionsTest, SingleLevel) {
  EXPECT_EQ(level_resolutions(GridConfig{1, 10, 2, 16, 16, 2}), std::vector<int>{16});
  EXPECT_DOUBLE_EQ((GridConfig{1, 10, 2, 16, 64, 2}.growth_factor()), 1.0);
}

TEST(LevelResolutionsTest, TwoLevelEndpoints) {
  EXPECT_EQ(level_resolutions(GridConfig{2, 10, 2, 16, 32, 2}), (std::vector<int>{16, 32}));
}

TEST(LevelResolutionsTest, FinestLevelWithinOneOfMax) {
  for (int levels = 2; levels <= 16; ++levels)
    for (int n_max : {17, 100, 513, 2048}) {
      const auto res = level_resolutions(GridConfig{levels, 19, 2, 16, n_max, 3});
      EXPECT_EQ(res.front(), 16);
      EXPECT_GE(res.back(), n_max - 1);
      EXPECT_LE(res.back(), n_max);
    }
}

TEST(SpatialHashTest, ZeroCornerIsZero) {
  const std::uint32_t corner[3] = {0, 0, 0};
  EXPECT_EQ(spatial_hash(corner, 1000, 3, std::size_t{1} << 19), 0u);
}

TEST(SpatialHashTest, FirstPrimeIsOne) {
  const std::uint32_t corner[3] = {3, 0, 0};
  EXPECT_EQ(spatial_hash(corner, 1000, 3, std::size_t{1} << 19), 3u);
}

TEST(SpatialHashTest, TwoDimensionalReference) {
  // (N+1)^2 = 9 > 8 rows, so the level is hashed.
  const std::uint32_t corner[2] = {1, 1};
  const std::uint32_t reference = (1u ^ 2654435761u) % 8u;
  EXPECT_EQ(reference, 0u);
  EXPECT_EQ(spatial_hash(corner, 2, 2, 8), reference);
}

TEST(SpatialHashTest, DenseIsFirstCoordinateFastest) {
  const std::uint32_t corner[3] = {2, 3, 1};
  EXPECT_EQ(spatial_hash(corner, 4, 3, 1 << 10), 2u + 5u * 3u + 25u * 1u);
}

TEST(SpatialHashTest, OutOfRangeCoordinate) {
  const std::uint32_t corner[2] = {5, 0};
  EXPECT_THROW(spatial_hash(corner, 4, 2, 64), InputDomainError);
}

TEST(SpatialHashTest, IndicesStayBelowEntryCount) {
  for (int dims : {2, 3})
    for (int res : {1, 3, 7, 10}) {
      const std::size_t table = 64;
      const std::size_t entries = level_entry_count(res, dims, table);
      std::vector<std::uint32_t> c(dims, 0);
      const int total = static_cast<int>(std::pow(res + 1, dims));
      for (int i = 0; i < total; ++i) {
        int rem = i;
        for (int k = 0; k < dims; ++k) {
          c[k] = static_cast<std::uint32_t>(rem % (res + 1));
          rem /= res + 1;
        }
        EXPECT_LT(spatial_hash(c, res, dims, table), entries);
      }
    }
}

TEST(FeatureTableTest, EntryCountsAndModes) {
  const GridConfig config{4, 6, 2, 2, 16, 2};
  FeatureTable table(config);
  std::size_t total = 0;
  for (int l = 0; l < config.levels; ++l) {
    const auto n = static_cast<std::size_t>(table.resolution(l) + 1);
    EXPECT_EQ(table.entries(l), std::min<std::size_t>(64, n * n));
    EXPECT_EQ(table.hashed(l), n * n > 64);
    total += table.entries(l) * 2;
  }
  EXPECT_EQ(table.size(), total);
}

TEST(EncodeTest, CornerReturnsStoredFeatures) {
  const GridConfig config = Small2d();
  const FeatureTable table = RandomTable(config, 1);
  const int n = table.resolution(1);
  const double x[2] = {3.0 / n, 5.0 / n};
  const EncodeTrace trace = encode(x, table);
  const std::uint32_t corner[2] = {3, 5};
  const std::uint32_t row = spatial_hash(corner, n, 2, config.table_size());
  for (int f = 0; f < 2; ++f) EXPECT_NEAR(trace.output(1)[f], table.at(1, row, f), 1e-15);
}

TEST(EncodeTest, CellCenterIsCornerMean) {
  const GridConfig config = Small2d();
  const FeatureTable table = RandomTable(config, 2);
  const int n = table.resolution(0);
  const double x[2] = {0.5 / n, 1.5 / n};
  const EncodeTrace trace = encode(x, table);
  for (int f = 0; f < 2; ++f) {
    double mean = 0.0;
    for (std::uint32_t dy = 0; dy < 2; ++dy)
      for (std::uint32_t dx = 0; dx < 2; ++dx) {
        const std::uint32_t c[2] = {dx, 1 + dy};
        mean += table.at(0, spatial_hash(c, n, 2, config.table_size()), f) / 4.0;
      }
    EXPECT_NEAR(trace.output(0)[f], mean, 1e-15);
  }
}

TEST(EncodeTest, ZeroTableGivesZero) {
  const FeatureTable table(Small3d());
  const double x[3] = {0.3, 0.9, 0.1};
  const EncodeTrace trace = encode(x, table);
  ASSERT_EQ(trace.output().size(), 6u);
  for (double v : trace.output()) EXPECT_EQ(v, 0.0);
}

TEST(EncodeTest, UpperBoundaryIsInsideLastCell) {
  const FeatureTable table = RandomTable(Small3d(), 3);
  const double x[3] = {1.0, 1.0, 1.0};
  EXPECT_NO_THROW(encode(x, table));
}

TEST(EncodeTest, RejectsBadPositions) {
  const FeatureTable table(Small2d());
  const double nan[2] = {std::nan(""), 0.5};
  const double outside[2] = {1.5, 0.5};
  const double wrong_arity[3] = {0.5, 0.5, 0.5};
  EXPECT_THROW(encode(nan, table), InputDomainError);
  EXPECT_THROW(encode(outside, table), InputDomainError);
  EXPECT_THROW(encode(wrong_arity, table), ContractError);
}

TEST(EncodeTest, WeightsArePartitionOfUnity) {
  const FeatureTable table(Small3d());
  Rng rng(4);
  EncodeTrace trace(table.config());
  for (int trial = 0; trial < 200; ++trial) {
    const double x[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    encode(x, table, trace);
    for (int l = 0; l < trace.levels(); ++l) {
      double sum = 0.0;
      for (double w : trace.weights(l)) {
        EXPECT_GE(w, 0.0);
        EXPECT_LE(w, 1.0);
        sum += w;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(EncodeTest, MultilinearAlongAnAxisInsideACell) {
  const FeatureTable table = RandomTable(Small3d(), 5);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = table.resolution(2);
    const double cell = std::floor(rng.uniform() * n);
    const double a0 = (cell + 0.1) / n, a1 = (cell + 0.9) / n;
    const double y = rng.uniform(), z = rng.uniform();
    const double alpha = rng.uniform();
    const double x0[3] = {a0, y, z}, x1[3] = {a1, y, z};
    const double xm[3] = {alpha * a0 + (1 - alpha) * a1, y, z};
    const auto e0 = encode(x0, table), e1 = encode(x1, table), em = encode(xm, table);
    for (int f = 0; f < 2; ++f)
      EXPECT_NEAR(em.output(2)[f], alpha * e0.output(2)[f] + (1 - alpha) * e1.output(2)[f],
                  1e-12);
  }
}

TEST(EncodeBackwardTest, ZeroGradientLeavesAccumulator) {
  const FeatureTable table = RandomTable(Small2d(), 7);
  FeatureTable grad(table.config());
  grad.values()[5] = 3.0;
  const double x[2] = {0.3, 0.7};
  const EncodeTrace trace = encode(x, table);
  const std::vector<double> zero(trace.output().size(), 0.0);
  encode_backward(trace, zero, grad);
  for (std::size_t i = 0; i < grad.size(); ++i) EXPECT_EQ(grad.values()[i], i == 5 ? 3.0 : 0.0);
}

TEST(EncodeBackwardTest, CornerConcentratesOnOneEntryPerLevel) {
  const GridConfig config{1, 10, 2, 8, 8, 2};
  const FeatureTable table(config);
  FeatureTable grad(config);
  const double x[2] = {2.0 / 8, 6.0 / 8};
  const EncodeTrace trace = encode(x, table);
  const std::vector<double> ones = {1.0, 1.0};
  encode_backward(trace, ones, grad);
  int touched = 0;
  for (std::size_t e = 0; e < grad.entries(0); ++e) {
    if (grad.at(0, e, 0) == 0.0) continue;
    ++touched;
    EXPECT_DOUBLE_EQ(grad.at(0, e, 0), 1.0);
    EXPECT_DOUBLE_EQ(grad.at(0, e, 1), 1.0);
  }
  EXPECT_EQ(touched, 1);
}

TEST(EncodeBackwardTest, AccumulatesAcrossCalls) {
  const FeatureTable table = RandomTable(Small2d(), 8);
  FeatureTable once(table.config()), twice(table.config());
  const double x[2] = {0.41, 0.13};
  const EncodeTrace trace = encode(x, table);
  std::vector<double> g(trace.output().size(), 0.5);
  encode_backward(trace, g, once);
  encode_backward(trace, g, twice);
  encode_backward(trace, g, twice);
  for (std::size_t i = 0; i < once.size(); ++i)
    EXPECT_DOUBLE_EQ(twice.values()[i], 2 * once.values()[i]);
}

TEST(EncodeBackwardTest, ShapeMismatch) {
  const FeatureTable table(Small2d());
  FeatureTable other(Small3d());
  const double x[2] = {0.5, 0.5};
  const EncodeTrace trace = encode(x, table);
  std::vector<double> g(trace.output().size(), 1.0);
  EXPECT_THROW(encode_backward(trace, g, other), ContractError);
  FeatureTable grad(table.config());
  std::vector<double> short_grad(2, 1.0);
  EXPECT_THROW(encode_backward(trace, short_grad, grad), ContractError);
}

TEST(EncodeBackwardTest, MatchesCentralDifferences) {
  for (const GridConfig& config : {Small2d(), Small3d()}) {
    FeatureTable table = RandomTable(config, 9);
    Rng rng(10);
    std::vector<double> x(config.dims);
    for (double& v : x) v = rng.uniform();
    std::vector<double> g(config.output_width());
    for (double& v : g) v = rng.uniform(-1, 1);
    auto objective = [&] {
      const EncodeTrace t = encode(x, table);
      const auto y = t.output();
      return std::inner_product(y.begin(), y.end(), g.begin(), 0.0);
    };
    FeatureTable grad(config);
    encode_backward(encode(x, table), g, grad);
    const double h = 1e-6;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const double keep = table.values()[i];
      table.values()[i] = keep + h;
      const double up = objective();
      table.values()[i] = keep - h;
      const double down = objective();
      table.values()[i] = keep;
      const double fd = (up - down) / (2 * h);
      EXPECT_NEAR(grad.values()[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(EncodeBackwardTest, AdjointDotProduct) {
  const GridConfig config = Small3d();
  Rng rng(11);
  const FeatureTable delta_table = RandomTable(config, 12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(3);
    for (double& v : x) v = rng.uniform();
    std::vector<double> g(config.output_width());
    for (double& v : g) v = rng.uniform(-1, 1);
    const EncodeTrace t = encode(x, delta_table);
    const auto y = t.output();
    const double lhs = std::inner_product(y.begin(), y.end(), g.begin(), 0.0);
    FeatureTable grad(config);
    encode_backward(encode(x, delta_table), g, grad);
    const double rhs = std::inner_product(grad.values().begin(), grad.values().end(),
                                          delta_table.values().begin(), 0.0);
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(InitTableTest, DeterministicAndBounded) {
  const GridConfig config{4, 10, 2, 4, 64, 3};
  const FeatureTable a = init_table(config, 42), b = init_table(config, 42),
                     c = init_table(config, 43);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  for (double v : a.values()) EXPECT_LE(std::abs(v), kInitRange);
}

TEST(InitTableTest, MeanNearZero) {
  const GridConfig config{1, 20, 1, 2048, 2048, 2};
  const FeatureTable table = init_table(config, 3);
  ASSERT_EQ(table.size(), std::size_t{1} << 20);
  const double mean = std::accumulate(table.values().begin(), table.values().end(), 0.0) /
                      static_cast<double>(table.size());
  EXPECT_LT(std::abs(mean), 1.8e-7);
}

}  // namespace
}  // namespace cawa
