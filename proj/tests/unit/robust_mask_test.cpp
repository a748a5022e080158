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

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "references.hpp"
#include "sls/common.hpp"
#include "sls/residual_stats.hpp"
#include "sls/robust_mask.hpp"

using namespace sls;
using namespace sls::testref;

namespace {

double outlier_iou(const InlierMask& inliers, const InlierMask& gt_outliers) {
  double inter = 0, uni = 0;
  for (std::size_t i = 0; i < inliers.size(); ++i) {
    const bool p = inliers[i] < 0.5, g = gt_outliers[i] > 0.5;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : inter / uni;
}

// Residual image with a high-residual disk on low background noise.
ScalarImage disk_residuals(int size, double area_fraction, InlierMask& disk, std::uint64_t seed) {
  Rng rng(seed);
  ScalarImage r(size, size);
  disk = InlierMask(size, size);
  const double rad = std::sqrt(area_fraction * size * size / M_PI);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x + 0.5 - size * 0.4, dy = y + 0.5 - size * 0.55;
      const bool in = dx * dx + dy * dy <= rad * rad;
      disk(x, y) = in ? 1.0 : 0.0;
      r(x, y) = in ? rng.uniform(0.4, 0.6) : rng.uniform(0.0, 0.05);
    }
  }
  return r;
}

}  // namespace

TEST_CASE("trim_mask") {
  ScalarImage r(4, 4, 0.2);
  CHECK(trim_mask(r, 0.2) == InlierMask(4, 4, 1.0));
  CHECK(trim_mask(r, std::numeric_limits<double>::infinity()) == InlierMask(4, 4, 1.0));

  ScalarImage halves(8, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) halves(x, y) = x < 4 ? 0.1 : 0.9;
  }
  ResidualHistogram h;
  h.update(halves.data);
  const InlierMask m = trim_mask(halves, h.quantile(0.5));
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) CHECK(m(x, y) == (x < 4 ? 1.0 : 0.0));
  }
  CHECK_THROWS_AS(trim_mask(r, -1.0), std::domain_error);
}

TEST_CASE("smooth_mask") {
  CHECK(smooth_mask(InlierMask(5, 5, 1.0)) == InlierMask(5, 5, 1.0));
  CHECK(smooth_mask(InlierMask(5, 5, 0.0)) == InlierMask(5, 5, 0.0));
  InlierMask hole(5, 5, 1.0);
  hole(2, 2) = 0.0;
  CHECK(smooth_mask(hole) == InlierMask(5, 5, 1.0));
  // Corner pixel: 4 valid taps; 2 inliers of 4 reach the threshold.
  InlierMask corner(4, 4, 0.0);
  corner(1, 0) = 1.0;
  corner(0, 1) = 1.0;
  CHECK(smooth_mask(corner)(0, 0) == 1.0);
  CHECK(smooth_mask(corner)(3, 3) == 0.0);

  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const InlierMask m = random_mask(rng, 13, 9, rng.uniform());
    CHECK(smooth_mask(m, 0.5) == smooth_reference(m, 0.5));
  }
}

TEST_CASE("patch_mask") {
  MaskConfig cfg;
  CHECK(patch_mask(InlierMask(16, 16, 1.0), cfg) == InlierMask(16, 16, 1.0));
  CHECK(patch_mask(InlierMask(16, 16, 0.0), cfg) == InlierMask(16, 16, 0.0));

  InlierMask quad(16, 16, 1.0);
  for (int y = 0; y < 8; ++y) {
    for (int x = 8; x < 16; ++x) quad(x, y) = 0.0;
  }
  CHECK(patch_mask(quad, cfg) == InlierMask(16, 16, 1.0));

  Rng rng(2);
  for (int i = 0; i < 40; ++i) {
    const int w = 5 + static_cast<int>(rng.below(40));
    const int h = 5 + static_cast<int>(rng.below(40));
    const InlierMask m = random_mask(rng, w, h, rng.uniform());
    cfg.patch_override = (i % 2) == 1;
    CHECK(patch_mask(m, cfg) == patch_reference(m, cfg));
  }
}

TEST_CASE("robust_filter on a disk distractor") {
  MaskConfig cfg;
  InlierMask disk;
  const ScalarImage r = disk_residuals(128, 0.2, disk, 4);
  ResidualHistogram h;
  h.update(r.data);
  const InlierMask m5 = robust_filter(r, h, cfg, 0.5);
  CHECK(outlier_iou(m5, disk) >= 0.95);
  const InlierMask m9 = robust_filter(r, h, cfg, 0.9);
  CHECK(subset(m9, m5));

  ScalarImage flat(32, 32, 0.01);
  ResidualHistogram hf;
  hf.update(flat.data);
  CHECK(robust_filter(flat, hf, cfg) == InlierMask(32, 32, 1.0));
}

TEST_CASE("pipeline matches brute force and only grows the inlier set") {
  Rng rng(9);
  MaskConfig cfg;
  for (int i = 0; i < 100; ++i) {
    const int w = 8 + static_cast<int>(rng.below(50));
    const int h = 8 + static_cast<int>(rng.below(50));
    ScalarImage r(w, h);
    for (double& v : r.data) v = rng.uniform() * rng.uniform();
    ResidualHistogram hist;
    hist.update(r.data);
    const double rho = hist.quantile(cfg.tau);
    InlierMask trimmed(w, h);
    for (std::size_t p = 0; p < r.size(); ++p) trimmed[p] = r[p] <= rho ? 1.0 : 0.0;
    const InlierMask smoothed = smooth_reference(trimmed, cfg.box_threshold);
    const InlierMask patched = patch_reference(smoothed, cfg);
    CHECK(robust_filter(r, hist, cfg) == patched);
    CHECK(subset(trimmed, smoothed));
    CHECK(subset(smoothed, patched));
  }
}

TEST_CASE("schedule_alpha") {
  MaskConfig cfg;
  cfg.beta1 = 3e-4;
  cfg.beta2 = 1.5;
  CHECK(schedule_alpha(0, cfg) == 1.0);
  CHECK(schedule_alpha(2, cfg) == doctest::Approx(std::exp(-6e-4)));
  CHECK(schedule_alpha(2, cfg) == doctest::Approx(0.99940).epsilon(1e-5));
  CHECK(schedule_alpha(100000000, cfg) < 1e-6);
  double prev = 1.0;
  for (int t = 0; t < 500; ++t) {
    const double a = schedule_alpha(t, cfg);
    CHECK(a <= prev);
    CHECK(a > 0.0);
    prev = a;
  }
  CHECK_THROWS(schedule_alpha(-1, cfg));
}

TEST_CASE("bernoulli_mask") {
  Rng rng(3);
  const InlierMask star = random_mask(rng, 30, 20, 0.5);
  CHECK(bernoulli_mask(star, 1.0, 1, 0) == InlierMask(30, 20, 1.0));
  CHECK(bernoulli_mask(star, 0.0, 1, 0) == star);
  CHECK(bernoulli_mask(star, 0.3, 5, 7) == bernoulli_mask(star, 0.3, 5, 7));
  CHECK_FALSE(bernoulli_mask(star, 0.3, 5, 7) == bernoulli_mask(star, 0.3, 5, 8));

  const InlierMask zeros(1000, 1000, 0.0);
  const InlierMask b = bernoulli_mask(zeros, 0.5, 42, 3);
  double mean = 0;
  for (double v : b.data) mean += v;
  mean /= static_cast<double>(b.size());
  CHECK(std::abs(mean - 0.5) < 0.002);

  // Per-pixel expectation at 3 sigma over repeated steps.
  InlierMask probs(8, 8);
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = (i % 3) / 2.0;
  const double alpha = 0.4;
  const int reps = 4000;
  std::vector<double> hits(probs.size(), 0.0);
  for (int s = 0; s < reps; ++s) {
    const InlierMask d = bernoulli_mask(probs, alpha, 9, static_cast<std::uint64_t>(s));
    for (std::size_t i = 0; i < d.size(); ++i) hits[i] += d[i];
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = alpha + (1 - alpha) * probs[i];
    const double sigma = std::sqrt(p * (1 - p) / reps);
    CHECK(std::abs(hits[i] / reps - p) <= 3 * sigma + 1e-12);
  }
}

TEST_CASE("mask modes") {
  for (auto m : {MaskMode::kNone, MaskMode::kTrim, MaskMode::kRobustFilter, MaskMode::kSlsAgg,
                 MaskMode::kSlsMlp}) {
    CHECK(parse_mask_mode(mask_mode_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_mask_mode("median"), ConfigError);
  MaskConfig bad;
  bad.tau = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
