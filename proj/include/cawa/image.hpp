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
#include <vector>

namespace cawa {

// Linear RGB in [0,1], row-major, three channels per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

// Binary PPM (P6, maxval 255). Reading divides by 255; writing rounds the
// clamped value to the nearest 8-bit level.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& image, const std::filesystem::path& path);

// Deterministic 8-bit quantized test card (smooth ramps, discs, a stripe
// patch) used by the image-fitting task when no input file is given.
Image synthetic_image(int width, int height, std::uint64_t seed);

}  // namespace cawa
