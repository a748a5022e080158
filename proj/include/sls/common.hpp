// Copyright 2026 Google LLC
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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sls {

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rgb = std::array<double, 3>;

// Row-major 2D grid of values; pixel (x, y) lives at data[y * width + x].
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] bool same_shape(int w, int h) const {
    return width == w && height == h;
  }
  template <typename U>
  [[nodiscard]] bool same_shape(const Grid<U>& o) const {
    return width == o.width && height == o.height;
  }

  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool operator==(const Grid& o) const = default;
};

using RgbImage = Grid<Rgb>;
// Per-pixel scalar image: residual magnitudes, inlier masks, probabilities.
using ScalarImage = Grid<double>;
// Inlier weights: 1 keeps a pixel in the loss, 0 discards it.
using InlierMask = Grid<double>;
using ClusterMap = Grid<int>;

// Per-pixel feature vectors, `channels` contiguous values per pixel.
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.0) {}

  [[nodiscard]] const double* pixel(std::size_t i) const {
    return data.data() + i * channels;
  }
  double* pixel(std::size_t i) { return data.data() + i * channels; }
  [[nodiscard]] std::size_t pixels() const {
    return static_cast<std::size_t>(width) * height;
  }

  bool operator==(const FeatureMap& o) const = default;
};

// Concatenates the channels of two equally sized feature maps.
FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);

// Deterministic, platform-independent random source. The standard
// distributions are implementation-defined, so samples are derived from raw
// 64-bit output here to keep datasets and runs bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stateless counter-based hash: the same key always yields the same bits.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, std::uint64_t c);
// Uniform [0, 1) keyed by (a, b, c).
double keyed_uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace sls
