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
#include <string_view>

#include "sls/common.hpp"
#include "sls/residual_stats.hpp"

namespace sls {

struct MaskConfig {
  double tau = 0.5;             // trimmed fraction: P(residual > rho) = tau
  double box_threshold = 0.5;   // 3x3 vote needed to restore an inlier
  int patch_size = 8;
  int neighborhood = 16;
  double patch_threshold = 0.6;
  double beta1 = 1e-3;          // warm-up decay per stair
  double beta2 = 1.5;           // warm-up stair length
  bool use_smooth = true;
  bool use_patch = true;
  // Replace whole patches by the neighbourhood vote instead of OR-ing it in.
  bool patch_override = false;

  void validate() const;
};

// 1 where residual <= rho (ties are inliers), else 0.
InlierMask trim_mask(const ScalarImage& residuals, double rho);

// out = mask OR [box3x3(mask) >= box_threshold]. The box mean is taken over
// the in-image taps only.
InlierMask smooth_mask(const InlierMask& mask, double box_threshold = 0.5);

// For each patch_size tile, averages the mask over a neighborhood-sized
// window centred on the tile and OR-s the vote [mean >= patch_threshold]
// into every pixel of the tile (or replaces it when patch_override is set).
// The window is shifted, not shrunk, to stay inside the image; it is only
// clipped when the image is smaller than the window. Edge tiles are
// truncated.
InlierMask patch_mask(const InlierMask& mask, const MaskConfig& cfg);

// trim_mask(rho = hist.quantile(tau)) followed by the enabled smoothing and
// patch stages.
InlierMask robust_filter(const ScalarImage& residuals, const ResidualHistogram& hist,
                         const MaskConfig& cfg);
// Same pipeline with tau overridden; used for the permissive/strict labels.
InlierMask robust_filter(const ScalarImage& residuals, const ResidualHistogram& hist,
                         const MaskConfig& cfg, double tau);

// Staircase exponential warm-up: exp(-beta1 * floor((t + 1) / beta2)).
double schedule_alpha(std::int64_t step, const MaskConfig& cfg);

// Each pixel is 1 with probability alpha + (1 - alpha) * mask_star, drawn
// from a counter-based generator keyed by (seed, step, pixel index).
InlierMask bernoulli_mask(const InlierMask& mask_star, double alpha,
                          std::uint64_t seed, std::uint64_t step);

enum class MaskMode { kNone, kTrim, kRobustFilter, kSlsAgg, kSlsMlp };
MaskMode parse_mask_mode(std::string_view name);
std::string mask_mode_name(MaskMode mode);

}  // namespace sls
