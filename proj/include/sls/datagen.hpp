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

#include <cstdint>
#include <string>
#include <vector>

#include "sls/common.hpp"

namespace sls {

struct GenConfig {
  int width = 96;
  int height = 96;
  int num_views = 60;
  double occupancy = 0.0;    // expected distractor pixel fraction per view
  int persistence = 1;       // consecutive views sharing one distractor set
  double jitter = 0.0;       // per-channel gain amplitude: 1 +- jitter
  bool camouflage = false;
  // Camouflaged distractors are mottled in 4-pixel cells. With probability
  // camouflage_fraction a cell repeats the background under it, shifted by
  // up to camouflage_contrast per channel; other cells copy texture from
  // elsewhere in the base image.
  double camouflage_fraction = 1.0;
  double camouflage_contrast = 0.005;
  // Probability that a distractor centre is drawn around the scene's hotspot
  // instead of uniformly.
  double spatial_bias = 0.0;
  double hotspot_spread = 0.15;  // normalised std-dev around the hotspot
  int blobs = 40;
  // Blob weights are exp(-edge_sharpness * q / 2); 1 gives a soft blend,
  // larger values give flat regions with sharp boundaries.
  double edge_sharpness = 4.0;
  int feature_dim = 8;           // 1 semantic + (feature_dim - 1) appearance
  double feature_noise_sigma = 0.05;
  double semantic_fidelity = 0.95;
  int feature_downsample = 4;

  void validate() const;
};

// Named presets: clean, easy, medium, hard, camouflage.
GenConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct SceneView {
  int id = 0;
  RgbImage image;       // contaminated
  RgbImage clean;       // same view without distractors
  ScalarImage gt_mask;  // 1 on distractor pixels
  FeatureMap features;
};

struct SceneDataset {
  GenConfig cfg;
  std::uint64_t seed = 0;
  RgbImage base;
  std::vector<SceneView> views;

  [[nodiscard]] int width() const { return cfg.width; }
  [[nodiscard]] int height() const { return cfg.height; }
  // Mean GT mask fraction over views.
  [[nodiscard]] double measured_occupancy() const;
  // Per-pixel mean of the contaminated views.
  [[nodiscard]] RgbImage mean_image() const;
};

// Normalised blend of cfg.blobs soft colour blobs with a spread of sizes.
RgbImage make_base_image(std::uint64_t seed, const GenConfig& cfg);

// Fully deterministic in (seed, cfg). Pixel values are multiples of 1/255
// and features are exactly representable in single precision, so the
// on-disk form round-trips.
SceneDataset generate_scene(std::uint64_t seed, const GenConfig& cfg);

// Channel 0: semantic value (1 on distractors, 0 elsewhere, each pixel
// flipped with probability 1 - semantic_fidelity); channels 1..: a fixed
// random projection of the view's RGB; plus i.i.d. Gaussian noise. The map is
// box-downsampled by feature_downsample and bilinearly upsampled. The
// projection depends on the scene seed only; flips and noise also on view_id.
FeatureMap synth_features(const RgbImage& view, const ScalarImage& gt_mask,
                          const GenConfig& cfg, std::uint64_t seed, int view_id = 0);

// sin(2^k pi u), cos(2^k pi u), sin(2^k pi v), cos(2^k pi v) for k < degree at
// normalised pixel coordinates u = x / W, v = y / H.
FeatureMap positional_encoding(int height, int width, int degree);

// 8-bit quantisation in place.
void quantize(RgbImage& img);

}  // namespace sls
