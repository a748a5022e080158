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
#include <vector>

#include "doctest.h"
#include "references.hpp"
#include "sls/common.hpp"
#include "sls/splat2d.hpp"

using namespace sls;
using namespace sls::testref;

TEST_CASE("covariance") {
  Splat s;
  s.log_scale = {std::log(0.2), std::log(0.05)};
  s.rotation = 0;
  Sym2 c = covariance(s);
  CHECK(c.xx == doctest::Approx(0.04));
  CHECK(c.yy == doctest::Approx(0.0025));
  CHECK(c.xy == doctest::Approx(0.0).scale(1e-12));
  s.rotation = M_PI / 2;
  c = covariance(s);
  CHECK(c.xx == doctest::Approx(0.0025));
  CHECK(c.yy == doctest::Approx(0.04));

  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    s.log_scale = {rng.uniform(-5, -0.5), rng.uniform(-5, -0.5)};
    s.rotation = rng.uniform(-6, 6);
    c = covariance(s);
    const double tr = c.xx + c.yy, det = c.xx * c.yy - c.xy * c.xy;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    const double l1 = tr / 2 + disc, l2 = tr / 2 - disc;
    const double e0 = std::exp(2 * s.log_scale[0]), e1 = std::exp(2 * s.log_scale[1]);
    CHECK(std::abs(l1 - std::max(e0, e1)) < 1e-10);
    CHECK(std::abs(l2 - std::min(e0, e1)) < 1e-10);
  }
}

TEST_CASE("render examples") {
  SplatModel empty;
  const RgbImage bg = render(empty, -1, 5, 4);
  for (const auto& p : bg.data) CHECK(p == Rgb{0.5, 0.5, 0.5});

  // Single fully opaque splat evaluated at its mean.
  SplatModel one;
  Splat s;
  s.mean = {0.5 / 4, 0.5 / 4};
  s.log_scale = {std::log(0.1), std::log(0.1)};
  s.opacity_logit = 60.0;
  s.color = {0.9, 0.1, 0.3};
  one.splats.push_back(s);
  const RgbImage img = render(one, -1, 4, 4);
  CHECK(img(0, 0)[0] == doctest::Approx(0.9));
  CHECK(img(0, 0)[1] == doctest::Approx(0.1));

  // Front red at half opacity over opaque blue at the shared centre.
  SplatModel two;
  Splat red = s, blue = s;
  red.color = {1, 0, 0};
  red.opacity_logit = 0.0;
  red.depth = 0.1;
  blue.color = {0, 0, 1};
  blue.depth = 0.9;
  two.splats = {blue, red};
  const RgbImage mix = render(two, -1, 4, 4);
  CHECK(mix(0, 0)[0] == doctest::Approx(0.5));
  CHECK(mix(0, 0)[1] == doctest::Approx(0.0));
  CHECK(mix(0, 0)[2] == doctest::Approx(0.5));
}

TEST_CASE("render invariants") {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    SplatModel m = random_scene(500 + t, false);
    m.splats.push_back(m.splats[0]);
    m.splats.back().color = {0.0, 1.0, 0.0};
    RenderCache cache;
    const RgbImage img = render(m, -1, 16, 12, &cache);
    for (const auto& p : img.data) {
      for (double v : p) CHECK((v >= 0.0 && v <= 1.0));
    }
    for (double v : cache.trans) CHECK((v >= 0.0 && v <= 1.0));
    for (double v : cache.final_trans) CHECK((v >= 0.0 && v <= 1.0));
    // Equal depths composite by index: swapping the two copies changes the
    // result, and re-rendering is reproducible.
    CHECK(render(m, -1, 16, 12) == img);
  }
}

TEST_CASE("render_backward matches finite differences") {
  Rng rng(99);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const bool glo = seed % 2 == 1;
    const SplatModel m = random_scene(seed, glo);
    const RgbImage g = random_grad(rng, kW, kH);
    const double err = render_grad_error(m, g, glo ? 1 : -1);
    INFO("seed " << seed);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("gradients vanish where a splat cannot reach") {
  SplatModel m = random_scene(1, false);
  m.splats[1].mean = {3.0, -2.0};
  RenderCache cache;
  (void)render(m, -1, kW, kH, &cache);
  Rng rng(3);
  ModelGrad grad;
  grad.reset(m);
  render_backward(m, cache, random_grad(rng, kW, kH), grad);
  for (double v : grad.splats[1].d) CHECK(v == 0.0);

  // A gradient that lives only on pixels no splat touches.
  SplatModel small;
  Splat s;
  s.mean = {0.1, 0.1};
  s.log_scale = {std::log(0.02), std::log(0.02)};
  small.splats.push_back(s);
  RenderCache c2;
  (void)render(small, -1, 16, 16, &c2);
  RgbImage g(16, 16, Rgb{0, 0, 0});
  g(15, 15) = {1, 1, 1};
  ModelGrad g2;
  g2.reset(small);
  render_backward(small, c2, g, g2);
  for (double v : g2.splats[0].d) CHECK(v == 0.0);

  ModelGrad g3;
  CHECK_THROWS_AS(render_backward(small, RenderCache{}, g, g3), std::logic_error);
}

TEST_CASE("apply_glo") {
  SplatModel m = random_scene(4, false);
  m.appearance.cfg = {true, 8, 16};
  m.appearance.init(3, 1);
  const auto ident = apply_glo(m, 2);
  for (std::size_t i = 0; i < m.splats.size(); ++i) CHECK(ident[i] == m.splats[i].color);

  // a = (2, 1, 1), b = 0 via the last-layer bias.
  const std::size_t last = m.appearance.mapper.layers().size() - 1;
  m.appearance.mapper.bias(last)[0] = 1.0;
  m.splats[0].color = {0.3, 0.3, 0.3};
  const auto adj = apply_glo(m, 0);
  CHECK(adj[0][0] == doctest::Approx(0.6));
  CHECK(adj[0][1] == doctest::Approx(0.3));
  CHECK(adj[0][2] == doctest::Approx(0.3));
}

TEST_CASE("utilization") {
  // Single splat: compare against finite-difference position gradients.
  SplatModel m;
  Splat s;
  s.mean = {0.43, 0.58};
  s.log_scale = {std::log(0.15), std::log(0.1)};
  s.rotation = 0.4;
  s.opacity_logit = 0.5;
  s.color = {0.9, 0.2, 0.4};
  m.splats.push_back(s);
  const int w = 12, h = 10;
  InlierMask mask(w, h, 1.0);
  for (int x = 0; x < 5; ++x) mask(x, 3) = 0.0;

  RenderCache cache;
  (void)render(m, -1, w, h, &cache);
  ModelGrad grad;
  grad.reset(m);
  PositionGradients pg;
  std::vector<double> fused;
  BackwardExtras extras{&pg, &mask, &fused};
  render_backward(m, cache, RgbImage(w, h, Rgb{0, 0, 0}), grad, extras);
  UtilizationTracker tracker;
  accumulate_utilization(tracker, pg, mask);

  const double step = 1e-4;  // pixels
  RgbImage dx[2];
  for (int axis = 0; axis < 2; ++axis) {
    SplatModel p = m, q = m;
    const int extent = axis == 0 ? w : h;
    p.splats[0].mean[axis] += step / extent;
    q.splats[0].mean[axis] -= step / extent;
    const RgbImage a = render(p, -1, w, h), b = render(q, -1, w, h);
    dx[axis] = RgbImage(w, h);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (int c = 0; c < 3; ++c) dx[axis][i][c] = (a[i][c] - b[i][c]) / (2 * step);
    }
  }
  double brute = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    double e = 0;
    for (int axis = 0; axis < 2; ++axis) {
      for (int c = 0; c < 3; ++c) e += dx[axis][i][c] * dx[axis][i][c];
    }
    brute += mask[i] * mask[i] * e;
  }
  brute /= w * h;
  CHECK(tracker.utilization[0] == doctest::Approx(brute).epsilon(1e-3));
  CHECK(fused[0] == doctest::Approx(tracker.utilization[0]).epsilon(1e-12));

  UtilizationTracker zero;
  accumulate_utilization(zero, pg, InlierMask(w, h, 0.0));
  CHECK(zero.utilization[0] == 0.0);
}

TEST_CASE("prune") {
  SplatModel m = random_scene(8, false);
  m.splats[2].mean = {-5.0, -5.0};
  UtilizationTracker tracker;
  tracker.reset(m.splats.size());
  const InlierMask mask(kW, kH, 1.0);
  for (int t = 0; t < tracker.period; ++t) {
    RenderCache cache;
    (void)render(m, -1, kW, kH, &cache);
    ModelGrad grad;
    grad.reset(m);
    PositionGradients pg;
    render_backward(m, cache, RgbImage(kW, kH, Rgb{0, 0, 0}), grad, {&pg, nullptr, nullptr});
    accumulate_utilization(tracker, pg, mask);
  }
  CHECK(tracker.window_steps == tracker.period);
  const auto keep = prune(m, tracker);
  CHECK(keep == std::vector<bool>{true, true, false});
  CHECK(m.splats.size() == 2);
  CHECK(tracker.utilization == std::vector<double>(2, 0.0));
  CHECK(tracker.window_steps == 0);

  // High utilization everywhere: nothing changes.
  tracker.utilization = {1.0, 1.0};
  const SplatModel before = m;
  prune(m, tracker);
  CHECK(m.splats == before.splats);

  // Never removes the last splat.
  tracker.utilization = {0.0, 0.0};
  prune(m, tracker);
  CHECK(m.splats.size() == 1);
  tracker.utilization = {0.0};
  prune(m, tracker);
  CHECK(m.splats.size() == 1);
}

TEST_CASE("init_model") {
  RgbImage mean(32, 24, Rgb{0.2, 0.4, 0.6});
  const SplatModel m = init_model(mean, 50, 4, GloConfig{}, 3);
  CHECK(m.splats.size() == 50);
  for (const Splat& s : m.splats) {
    CHECK(s.color == Rgb{0.2, 0.4, 0.6});
    CHECK(s.opacity() == 0.5);
    CHECK(std::exp(s.log_scale[0]) * 32 == doctest::Approx(4.0));
  }
  CHECK(init_model(mean, 50, 4, GloConfig{}, 3).splats == m.splats);
  CHECK_THROWS_AS(init_model(mean, 0, 4, GloConfig{}, 3), ConfigError);
}
