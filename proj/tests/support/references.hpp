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

// Brute-force references and random fixtures shared by the unit tests and
// the acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sls/common.hpp"
#include "sls/robust_mask.hpp"
#include "sls/smallnet.hpp"
#include "sls/splat2d.hpp"

namespace sls::testref {

inline InlierMask random_mask(Rng& rng, int w, int h, double p) {
  InlierMask m(w, h);
  for (double& v : m.data) v = rng.uniform() < p ? 1.0 : 0.0;
  return m;
}

// Direct 3x3 convolution over in-image taps.
inline InlierMask smooth_reference(const InlierMask& m, double thr) {
  InlierMask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double s = 0;
      int n = 0;
      for (int yy = y - 1; yy <= y + 1; ++yy) {
        for (int xx = x - 1; xx <= x + 1; ++xx) {
          if (xx < 0 || yy < 0 || xx >= m.width || yy >= m.height) continue;
          s += m(xx, yy);
          ++n;
        }
      }
      out(x, y) = (m(x, y) == 1.0 || s / n >= thr) ? 1.0 : 0.0;
    }
  }
  return out;
}

// Brute-force window means; the window is slid back inside the image.
inline InlierMask patch_reference(const InlierMask& m, const MaskConfig& cfg) {
  InlierMask out = m;
  const int p = cfg.patch_size, n = cfg.neighborhood;
  auto first = [&](int t, int extent) {
    int s = t + p / 2 - n / 2;
    if (n <= extent) {
      if (s < 0) s = 0;
      if (s + n > extent) s = extent - n;
    }
    return s;
  };
  for (int ty = 0; ty < m.height; ty += p) {
    for (int tx = 0; tx < m.width; tx += p) {
      const int sx = first(tx, m.width), sy = first(ty, m.height);
      double sum = 0;
      int count = 0;
      for (int y = sy; y < sy + n; ++y) {
        for (int x = sx; x < sx + n; ++x) {
          if (x < 0 || y < 0 || x >= m.width || y >= m.height) continue;
          sum += m(x, y);
          ++count;
        }
      }
      const bool vote = sum / count >= cfg.patch_threshold;
      for (int y = ty; y < std::min(ty + p, m.height); ++y) {
        for (int x = tx; x < std::min(tx + p, m.width); ++x) {
          if (cfg.patch_override) out(x, y) = vote ? 1.0 : 0.0;
          else if (vote) out(x, y) = 1.0;
        }
      }
    }
  }
  return out;
}

inline bool subset(const InlierMask& a, const InlierMask& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
  }
  return true;
}

// Smallest |pre-activation| over relu units and smallest |w| over weights;
// finite differences are only meaningful away from those kinks.
inline double kink_distance(const DenseNet& net, const std::vector<double>& x) {
  DenseNet::Cache cache;
  (void)net.forward(x, cache);
  double d = 1e9;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    if (net.layers()[l].act == Activation::kRelu) {
      for (double z : cache.preact[l]) d = std::min(d, std::abs(z));
    }
    if (net.lipschitz_normalize()) {
      const auto& L = net.layers()[l];
      const double* W = net.params().data() + L.offset;
      for (int i = 0; i < L.in * L.out; ++i) d = std::min(d, std::abs(W[i]));
      for (int j = 0; j < L.out; ++j) {
        double row = 0;
        for (int k = 0; k < L.in; ++k) row += std::abs(W[j * L.in + k]);
        d = std::min(d, std::abs(row - softplus(net.lipschitz_c(l))));
      }
    }
  }
  return d;
}

struct Instance {
  DenseNet net;
  std::vector<double> x;
};

inline Instance random_instance(std::uint64_t seed, bool normalize, bool tighten) {
  Rng rng(seed);
  for (;;) {
    const int in = 2 + static_cast<int>(rng.below(5));
    const int h1 = 3 + static_cast<int>(rng.below(6));
    const int h2 = 3 + static_cast<int>(rng.below(6));
    DenseNet net({in, h1, h2, 1}, {Activation::kRelu, Activation::kRelu, Activation::kSigmoid},
                 normalize);
    net.init_random(rng.next_u64());
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      double* b = net.bias(l);
      for (int j = 0; j < net.layers()[l].out; ++j) b[j] = rng.uniform(-0.3, 0.3);
      if (tighten) net.lipschitz_c(l) = rng.uniform(-1.0, 0.5);
    }
    std::vector<double> x(in);
    for (double& v : x) v = rng.uniform(-1, 1);
    if (kink_distance(net, x) > 1e-2) return {net, x};
  }
}

constexpr int kW = 8;
constexpr int kH = 8;

inline double frac_distance(double v) { return std::abs(v - std::round(v)); }

// Box edges that sit close to a pixel centre make the truncated Gaussian
// jump under a finite-difference step; such scenes are rejected.
inline bool boxes_stable(const SplatModel& m, int w, int h) {
  for (const Splat& s : m.splats) {
    const Sym2 c = covariance(s);
    const double ex = 3 * std::sqrt(c.xx), ey = 3 * std::sqrt(c.yy);
    for (double e : {(s.mean[0] - ex) * w - 0.5, (s.mean[0] + ex) * w - 0.5,
                     (s.mean[1] - ey) * h - 0.5, (s.mean[1] + ey) * h - 0.5}) {
      if (frac_distance(e) < 0.02) return false;
    }
  }
  return true;
}

inline bool colors_unclamped(const SplatModel& m) {
  const auto [a, b] = m.appearance.affine(0);
  for (const Splat& s : m.splats) {
    for (int c = 0; c < 3; ++c) {
      const double v = a[c] * s.color[c] + b[c];
      if (v < 0.02 || v > 0.98) return false;
    }
  }
  return true;
}

inline SplatModel random_scene(std::uint64_t seed, bool glo) {
  Rng rng(seed);
  for (;;) {
    SplatModel m;
    for (int i = 0; i < 3; ++i) {
      Splat s;
      s.mean = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
      s.log_scale = {std::log(rng.uniform(0.08, 0.3)), std::log(rng.uniform(0.08, 0.3))};
      s.rotation = rng.uniform(0, 3.1);
      s.opacity_logit = rng.uniform(-1, 1.5);
      s.color = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
      s.depth = rng.uniform();
      m.splats.push_back(s);
    }
    if (glo) {
      m.appearance.cfg = {true, 3, 4};
      m.appearance.init(2, rng.next_u64());
      for (double& p : m.appearance.mapper.params()) p = rng.uniform(-0.2, 0.2);
    }
    if (boxes_stable(m, kW, kH) && colors_unclamped(m)) return m;
  }
}

inline RgbImage random_grad(Rng& rng, int w, int h) {
  RgbImage g(w, h);
  for (auto& p : g.data) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return g;
}

inline double contract(const RgbImage& img, const RgbImage& g) {
  double s = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) s += img[i][c] * g[i][c];
  }
  return s;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

// Worst relative error of render_backward against central differences over
// every splat parameter, the view latent and the mapper parameters.
inline double render_grad_error(SplatModel m, const RgbImage& g, int view) {
  RenderCache cache;
  (void)render(m, view, kW, kH, &cache);
  ModelGrad grad;
  grad.reset(m);
  render_backward(m, cache, g, grad);

  const double h = 1e-4;
  auto f = [&]() { return contract(render(m, view, kW, kH), g); };
  auto fd = [&](double& p) {
    const double o = p;
    p = o + h;
    const double up = f();
    p = o - h;
    const double down = f();
    p = o;
    return (up - down) / (2 * h);
  };
  double worst = 0;
  for (std::size_t i = 0; i < m.splats.size(); ++i) {
    for (int k = 0; k < kSplatParams; ++k) {
      worst = std::max(worst, rel_err(grad.splats[i].d[k], fd(splat_param(m.splats[i], k))));
    }
  }
  if (m.appearance.cfg.enabled) {
    auto& z = m.appearance.latents[view];
    for (std::size_t k = 0; k < z.size(); ++k) worst = std::max(worst, rel_err(grad.latent[k], fd(z[k])));
    auto p = m.appearance.mapper.params();
    for (std::size_t k = 0; k < p.size(); ++k) worst = std::max(worst, rel_err(grad.mapper[k], fd(p[k])));
  }
  return worst;
}

}  // namespace sls::testref
