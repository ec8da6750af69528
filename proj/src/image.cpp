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

#include "cawa/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "cawa/error.hpp"
#include "cawa/rng.hpp"

namespace cawa {

namespace {

// Reads the next whitespace-delimited header token, skipping # comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  while (true) {
    const int c = in.get();
    if (c == EOF) throw FormatError("truncated PPM header: " + path.string());
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  if (next_token(in, path) != "P6")
    throw FormatError("not a binary PPM (P6): " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in, path));
    h = std::stoi(next_token(in, path));
    maxval = std::stoi(next_token(in, path));
  } catch (const std::logic_error&) {
    throw FormatError("malformed PPM header: " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval != 255)
    throw FormatError("unsupported PPM geometry or maxval: " + path.string());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw FormatError("truncated PPM pixel data: " + path.string());
  Image image(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) image.rgb[i] = bytes[i] / 255.0;
  return image;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.rgb.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(
        std::lround(std::clamp(image.rgb[i], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image: " + path.string());
}

Image synthetic_image(int width, int height, std::uint64_t seed) {
  if (width <= 0 || height <= 0) throw ContractError("image size must be positive");
  Rng rng(seed, Stream::kSynthetic);
  struct Disc {
    double cx, cy, r, red, green, blue;
  };
  std::vector<Disc> discs(4);
  for (Disc& d : discs) {
    d.cx = rng.uniform(0.15, 0.85);
    d.cy = rng.uniform(0.15, 0.85);
    d.r = rng.uniform(0.08, 0.2);
    d.red = rng.uniform();
    d.green = rng.uniform();
    d.blue = rng.uniform();
  }
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  Image image(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width;
      const double v = (y + 0.5) / height;
      double rgb[3] = {0.2 + 0.6 * u, 0.2 + 0.6 * v,
                       0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * (u + v) + phase)};
      for (const Disc& d : discs) {
        const double dist = std::hypot(u - d.cx, v - d.cy);
        // Soft edge about one pixel wide at 64 px.
        const double t = std::clamp((d.r - dist) * 64.0 + 0.5, 0.0, 1.0);
        rgb[0] += t * (d.red - rgb[0]);
        rgb[1] += t * (d.green - rgb[1]);
        rgb[2] += t * (d.blue - rgb[2]);
      }
      if (u > 0.6 && v > 0.65) {
        const double stripe = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 6.0 * u);
        for (double& c : rgb) c = 0.7 * c + 0.3 * stripe;
      }
      for (int c = 0; c < 3; ++c)
        image.at(x, y, c) = std::round(std::clamp(rgb[c], 0.0, 1.0) * 255.0) / 255.0;
    }
  }
  return image;
}

}  // namespace cawa
