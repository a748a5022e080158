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

#include "sls/robust_mask.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sls {

void MaskConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("mask.tau must lie in (0, 1)");
  if (patch_size < 1) throw ConfigError("mask.patch_size must be >= 1");
  if (neighborhood < patch_size) throw ConfigError("mask.neighborhood must be >= mask.patch_size");
  if (!(beta1 >= 0.0)) throw ConfigError("mask.beta1 must be >= 0");
  if (!(beta2 > 0.0)) throw ConfigError("mask.beta2 must be > 0");
}

InlierMask trim_mask(const ScalarImage& residuals, double rho) {
  if (std::isnan(rho) || rho < 0.0) throw std::domain_error("trim_mask: rho must be >= 0");
  InlierMask out(residuals.width, residuals.height, 0.0);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double r = residuals[i];
    if (!std::isfinite(r)) throw std::domain_error("trim_mask: non-finite residual");
    out[i] = r <= rho ? 1.0 : 0.0;
  }
  return out;
}

InlierMask smooth_mask(const InlierMask& mask, double box_threshold) {
  const int w = mask.width;
  const int h = mask.height;
  InlierMask out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(x, y) >= 0.5) {
        out(x, y) = 1.0;
        continue;
      }
      double sum = 0.0;
      int taps = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          sum += mask(xx, yy);
          ++taps;
        }
      }
      out(x, y) = sum >= box_threshold * taps ? 1.0 : 0.0;
    }
  }
  return out;
}

namespace {

// Window [start, start + size) of length n placed so that it contains the
// tile centre and stays inside [0, extent) whenever n <= extent.
std::pair<int, int> window_range(int tile_start, int tile, int n, int extent) {
  int start = tile_start + tile / 2 - n / 2;
  if (n <= extent) {
    start = std::clamp(start, 0, extent - n);
    return {start, start + n};
  }
  return {std::max(start, 0), std::min(start + n, extent)};
}

}  // namespace

InlierMask patch_mask(const InlierMask& mask, const MaskConfig& cfg) {
  const int w = mask.width;
  const int h = mask.height;
  const int p = cfg.patch_size;
  const int n = cfg.neighborhood;

  // Summed-area table for window means.
  std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  auto at = [&](int x, int y) -> double& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += mask(x, y);
      at(x + 1, y + 1) = at(x + 1, y) + row;
    }
  }

  InlierMask out = mask;
  for (int ty = 0; ty < h; ty += p) {
    const auto [y0, y1] = window_range(ty, p, n, h);
    for (int tx = 0; tx < w; tx += p) {
      const auto [x0, x1] = window_range(tx, p, n, w);
      const double sum = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
      const double count = static_cast<double>((x1 - x0) * (y1 - y0));
      const bool vote = sum >= cfg.patch_threshold * count;
      for (int y = ty; y < std::min(ty + p, h); ++y) {
        for (int x = tx; x < std::min(tx + p, w); ++x) {
          if (cfg.patch_override) {
            out(x, y) = vote ? 1.0 : 0.0;
          } else if (vote) {
            out(x, y) = 1.0;
          }
        }
      }
    }
  }
  return out;
}

InlierMask robust_filter(const ScalarImage& residuals, const ResidualHistogram& hist,
                         const MaskConfig& cfg, double tau) {
  InlierMask m = trim_mask(residuals, hist.quantile(tau));
  if (cfg.use_smooth) m = smooth_mask(m, cfg.box_threshold);
  if (cfg.use_patch) m = patch_mask(m, cfg);
  return m;
}

InlierMask robust_filter(const ScalarImage& residuals, const ResidualHistogram& hist,
                         const MaskConfig& cfg) {
  return robust_filter(residuals, hist, cfg, cfg.tau);
}

double schedule_alpha(std::int64_t step, const MaskConfig& cfg) {
  if (step < 0) throw std::domain_error("schedule_alpha: step must be >= 0");
  const double stairs = std::floor(static_cast<double>(step + 1) / cfg.beta2);
  return std::exp(-cfg.beta1 * stairs);
}

InlierMask bernoulli_mask(const InlierMask& mask_star, double alpha,
                          std::uint64_t seed, std::uint64_t step) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::domain_error("bernoulli_mask: alpha must lie in [0, 1]");
  InlierMask out(mask_star.width, mask_star.height, 0.0);
  for (std::size_t i = 0; i < mask_star.size(); ++i) {
    const double p = alpha + (1.0 - alpha) * mask_star[i];
    out[i] = keyed_uniform(seed, step, i) < p ? 1.0 : 0.0;
  }
  return out;
}

MaskMode parse_mask_mode(std::string_view name) {
  if (name == "none") return MaskMode::kNone;
  if (name == "trim") return MaskMode::kTrim;
  if (name == "robust_filter") return MaskMode::kRobustFilter;
  if (name == "sls_agg") return MaskMode::kSlsAgg;
  if (name == "sls_mlp") return MaskMode::kSlsMlp;
  throw ConfigError("unknown mask.mode '" + std::string(name) +
                    "' (expected none|trim|robust_filter|sls_agg|sls_mlp)");
}

std::string mask_mode_name(MaskMode mode) {
  switch (mode) {
    case MaskMode::kNone:
      return "none";
    case MaskMode::kTrim:
      return "trim";
    case MaskMode::kRobustFilter:
      return "robust_filter";
    case MaskMode::kSlsAgg:
      return "sls_agg";
    case MaskMode::kSlsMlp:
      return "sls_mlp";
  }
  return "none";
}

}  // namespace sls
