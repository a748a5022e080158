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

#include "sls/splat2d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sls/simd.hpp"

namespace sls {

double Splat::opacity() const { return sigmoid(opacity_logit); }

double& splat_param(Splat& s, int k) {
  switch (k) {
    case 0:
      return s.mean[0];
    case 1:
      return s.mean[1];
    case 2:
      return s.log_scale[0];
    case 3:
      return s.log_scale[1];
    case 4:
      return s.rotation;
    case 5:
      return s.opacity_logit;
    case 6:
      return s.color[0];
    case 7:
      return s.color[1];
    case 8:
      return s.color[2];
    default:
      throw std::out_of_range("splat_param: index");
  }
}

double splat_param(const Splat& s, int k) { return splat_param(const_cast<Splat&>(s), k); }

Sym2 covariance(const Splat& s) {
  const double c = std::cos(s.rotation);
  const double sn = std::sin(s.rotation);
  const double v0 = std::exp(2.0 * s.log_scale[0]);
  const double v1 = std::exp(2.0 * s.log_scale[1]);
  return {c * c * v0 + sn * sn * v1, c * sn * (v0 - v1), sn * sn * v0 + c * c * v1};
}

namespace {

// Inverse covariance in closed form from the same parameters.
Sym2 conic(const Splat& s) {
  const double c = std::cos(s.rotation);
  const double sn = std::sin(s.rotation);
  const double p0 = std::exp(-2.0 * s.log_scale[0]);
  const double p1 = std::exp(-2.0 * s.log_scale[1]);
  return {c * c * p0 + sn * sn * p1, c * sn * (p0 - p1), sn * sn * p0 + c * c * p1};
}

}  // namespace

void Appearance::init(int views, std::uint64_t seed) {
  latents.assign(static_cast<std::size_t>(std::max(views, 0)),
                 std::vector<double>(static_cast<std::size_t>(cfg.latent_dim), 0.0));
  if (!cfg.enabled) {
    mapper = DenseNet();
    return;
  }
  Rng rng(seed);
  for (auto& z : latents) {
    for (double& v : z) v = 0.1 * rng.normal();
  }
  mapper = DenseNet({cfg.latent_dim, cfg.hidden, 6},
                    {Activation::kRelu, Activation::kIdentity}, false);
  mapper.init_random(rng.next_u64());
  mapper.zero_last_layer();
}

std::pair<Rgb, Rgb> Appearance::affine(int view) const {
  Rgb a{1.0, 1.0, 1.0};
  Rgb b{0.0, 0.0, 0.0};
  if (!cfg.enabled || view < 0 || mapper.param_count() == 0) return {a, b};
  const std::vector<double> out = mapper.forward(latents.at(static_cast<std::size_t>(view)));
  for (int c = 0; c < 3; ++c) {
    a[c] = 1.0 + out[c];
    b[c] = out[3 + c];
  }
  return {a, b};
}

std::vector<Rgb> apply_glo(const SplatModel& model, int view) {
  const auto [a, b] = model.appearance.affine(view);
  std::vector<Rgb> out(model.splats.size());
  for (std::size_t i = 0; i < model.splats.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      out[i][c] = std::clamp(a[c] * model.splats[i].color[c] + b[c], 0.0, 1.0);
    }
  }
  return out;
}

SplatModel init_model(const RgbImage& mean_image, int count, int views,
                      const GloConfig& glo, std::uint64_t seed) {
  if (count < 1) throw ConfigError("trainer.splats must be >= 1");
  const int w = mean_image.width;
  const int h = mean_image.height;
  Rng rng(seed);
  SplatModel model;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count) * w / h)));
  const int rows = (count + cols - 1) / cols;
  const double init_log_scale = std::log(4.0 / static_cast<double>(std::max(w, h)));
  for (int i = 0; i < count; ++i) {
    const int gx = i % cols;
    const int gy = i / cols;
    Splat s;
    s.mean[0] = std::clamp((gx + 0.5 + 0.5 * rng.uniform(-1.0, 1.0)) / cols, 0.0, 1.0);
    s.mean[1] = std::clamp((gy + 0.5 + 0.5 * rng.uniform(-1.0, 1.0)) / rows, 0.0, 1.0);
    s.log_scale = {init_log_scale, init_log_scale};
    s.rotation = 0.0;
    s.opacity_logit = 0.0;
    const int px = std::clamp(static_cast<int>(s.mean[0] * w), 0, w - 1);
    const int py = std::clamp(static_cast<int>(s.mean[1] * h), 0, h - 1);
    s.color = mean_image(px, py);
    s.depth = rng.uniform();
    model.splats.push_back(s);
  }
  model.appearance.cfg = glo;
  model.appearance.init(views, rng.next_u64());
  return model;
}

PixelBox pixel_box(const Splat& s, int width, int height) {
  const Sym2 cov = covariance(s);
  const double ex = 3.0 * std::sqrt(cov.xx);
  const double ey = 3.0 * std::sqrt(cov.yy);
  PixelBox b;
  const double lx = std::ceil((s.mean[0] - ex) * width - 0.5);
  const double hx = std::floor((s.mean[0] + ex) * width - 0.5);
  const double ly = std::ceil((s.mean[1] - ey) * height - 0.5);
  const double hy = std::floor((s.mean[1] + ey) * height - 0.5);
  if (hx < 0.0 || hy < 0.0 || lx > width - 1 || ly > height - 1 || lx > hx || ly > hy) {
    return b;
  }
  b.x0 = static_cast<int>(std::max(lx, 0.0));
  b.x1 = static_cast<int>(std::min(hx, static_cast<double>(width - 1)));
  b.y0 = static_cast<int>(std::max(ly, 0.0));
  b.y1 = static_cast<int>(std::min(hy, static_cast<double>(height - 1)));
  return b;
}

namespace {

simd::SplatRow make_row(const Splat& s, const Sym2& q, const Rgb& color, int width,
                        int height, int x0, int y) {
  simd::SplatRow r{};
  r.conic_a = q.xx;
  r.conic_b = q.xy;
  r.conic_c = q.yy;
  r.mean_x = s.mean[0];
  r.mean_y = s.mean[1];
  r.opacity = s.opacity();
  r.color[0] = color[0];
  r.color[1] = color[1];
  r.color[2] = color[2];
  r.v = (y + 0.5) / height;
  r.du = 1.0 / width;
  r.u0 = (x0 + 0.5) / width;
  return r;
}

std::vector<int> depth_order(const std::vector<Splat>& splats) {
  std::vector<int> order(splats.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return splats[a].depth < splats[b].depth; });
  return order;
}

}  // namespace

RgbImage render(const SplatModel& model, int view, int width, int height,
                RenderCache* cache) {
  if (width < 1 || height < 1) throw std::invalid_argument("render: empty image");
  if (view >= 0 && model.appearance.cfg.enabled &&
      static_cast<std::size_t>(view) >= model.appearance.latents.size()) {
    throw std::out_of_range("render: view index out of range");
  }
  const auto& k = simd::kernels();
  const std::size_t npix = static_cast<std::size_t>(width) * height;
  const std::size_t n = model.splats.size();

  RenderCache local;
  RenderCache& rc = cache != nullptr ? *cache : local;
  rc.width = width;
  rc.height = height;
  rc.view = view;
  rc.order = depth_order(model.splats);
  rc.boxes.resize(n);
  rc.offset.resize(n);

  // Appearance.
  rc.glo_a = {1.0, 1.0, 1.0};
  rc.glo_b = {0.0, 0.0, 0.0};
  rc.glo_cache = {};
  if (model.appearance.cfg.enabled && view >= 0 && model.appearance.mapper.param_count() > 0) {
    const std::vector<double> out = model.appearance.mapper.forward(
        model.appearance.latents[static_cast<std::size_t>(view)], rc.glo_cache);
    for (int c = 0; c < 3; ++c) {
      rc.glo_a[c] = 1.0 + out[c];
      rc.glo_b[c] = out[3 + c];
    }
  }
  rc.colors.resize(n);
  rc.raw_affine.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = rc.glo_a[c] * model.splats[i].color[c] + rc.glo_b[c];
      rc.raw_affine[i][c] = v;
      rc.colors[i][c] = std::clamp(v, 0.0, 1.0);
    }
  }

  std::size_t total = 0;
  for (int idx : rc.order) {
    rc.boxes[idx] = pixel_box(model.splats[idx], width, height);
    rc.offset[idx] = total;
    total += rc.boxes[idx].area();
  }
  rc.gauss.resize(total);
  rc.trans.resize(total);

  std::vector<double> trans(npix, 1.0);
  std::vector<double> acc(3 * npix, 0.0);
  double* acc_r = acc.data();
  double* acc_g = acc_r + npix;
  double* acc_b = acc_g + npix;

  for (int idx : rc.order) {
    const PixelBox& box = rc.boxes[idx];
    if (box.empty()) continue;
    const Splat& s = model.splats[idx];
    const Sym2 q = conic(s);
    const std::size_t w = static_cast<std::size_t>(box.width());
    std::size_t pair = rc.offset[idx];
    for (int y = box.y0; y <= box.y1; ++y) {
      const simd::SplatRow row = make_row(s, q, rc.colors[idx], width, height, box.x0, y);
      const std::size_t p = static_cast<std::size_t>(y) * width + box.x0;
      k.composite_forward(row, w, trans.data() + p, acc_r + p, acc_g + p, acc_b + p,
                          rc.gauss.data() + pair, rc.trans.data() + pair);
      pair += w;
    }
  }

  RgbImage img(width, height);
  for (std::size_t p = 0; p < npix; ++p) {
    img[p] = {acc_r[p] + model.background[0] * trans[p],
              acc_g[p] + model.background[1] * trans[p],
              acc_b[p] + model.background[2] * trans[p]};
  }
  rc.final_trans = std::move(trans);
  return img;
}

void ModelGrad::reset(const SplatModel& model) {
  splats.assign(model.splats.size(), SplatGrad{});
  latent.assign(static_cast<std::size_t>(model.appearance.cfg.latent_dim), 0.0);
  mapper.assign(model.appearance.mapper.param_count(), 0.0);
}

void render_backward(const SplatModel& model, const RenderCache& cache,
                     const RgbImage& grad_image, ModelGrad& grad,
                     const BackwardExtras& extras) {
  if (!cache.valid() || cache.boxes.size() != model.splats.size() ||
      cache.colors.size() != model.splats.size()) {
    throw std::logic_error("render_backward: no matching forward cache");
  }
  const int width = cache.width;
  const int height = cache.height;
  if (!grad_image.same_shape(width, height)) {
    throw std::invalid_argument("render_backward: gradient image size mismatch");
  }
  if (grad.splats.size() != model.splats.size()) grad.reset(model);
  const auto& k = simd::kernels();
  const std::size_t npix = static_cast<std::size_t>(width) * height;
  const std::size_t n = model.splats.size();

  std::vector<double> planes(6 * npix);
  double* g_r = planes.data();
  double* g_g = g_r + npix;
  double* g_b = g_g + npix;
  double* b_r = g_b + npix;
  double* b_g = b_r + npix;
  double* b_b = b_g + npix;
  for (std::size_t p = 0; p < npix; ++p) {
    g_r[p] = grad_image[p][0];
    g_g[p] = grad_image[p][1];
    g_b[p] = grad_image[p][2];
    b_r[p] = model.background[0];
    b_g[p] = model.background[1];
    b_b[p] = model.background[2];
  }

  PositionGradients* pg = extras.position_grads;
  if (pg != nullptr) {
    pg->width = width;
    pg->height = height;
    pg->boxes = cache.boxes;
    pg->offset.assign(n, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      pg->offset[i] = total;
      total += 6 * cache.boxes[i].area();
    }
    pg->values.assign(total, 0.0);
  }
  const bool fused = extras.util_mask != nullptr && extras.util_out != nullptr;
  if (fused) {
    if (!extras.util_mask->same_shape(width, height)) {
      throw std::invalid_argument("render_backward: utilization mask size mismatch");
    }
    if (extras.util_out->size() != n) extras.util_out->assign(n, 0.0);
  }
  // x_g in pixel units: d/d(mean_x * W) = (1/W) d/d(mean_x).
  const double sx = 1.0 / width;
  const double sy = 1.0 / height;
  std::vector<double> row_jac(fused ? 6 * static_cast<std::size_t>(width) : 0);

  Rgb d_a{0, 0, 0}, d_b{0, 0, 0};
  for (auto it = cache.order.rbegin(); it != cache.order.rend(); ++it) {
    const int idx = *it;
    const PixelBox& box = cache.boxes[idx];
    if (box.empty()) continue;
    const Splat& s = model.splats[idx];
    const Sym2 q = conic(s);
    const std::size_t w = static_cast<std::size_t>(box.width());
    const std::size_t area = box.area();
    simd::RowGradSums sums{};
    std::size_t pair = cache.offset[idx];
    double util = 0.0;
    for (int y = box.y0; y <= box.y1; ++y) {
      const simd::SplatRow row = make_row(s, q, cache.colors[idx], width, height, box.x0, y);
      const std::size_t p = static_cast<std::size_t>(y) * width + box.x0;
      double* jac[6];
      double* const* jac_arg = nullptr;
      if (pg != nullptr) {
        double* base = pg->values.data() + pg->offset[idx] +
                       static_cast<std::size_t>(y - box.y0) * w;
        for (int c = 0; c < 6; ++c) jac[c] = base + static_cast<std::size_t>(c) * area;
        jac_arg = jac;
      } else if (fused) {
        for (int c = 0; c < 6; ++c) jac[c] = row_jac.data() + static_cast<std::size_t>(c) * w;
        jac_arg = jac;
      }
      k.composite_backward(row, w, cache.gauss.data() + pair, cache.trans.data() + pair,
                           g_r + p, g_g + p, g_b + p, b_r + p, b_g + p, b_b + p, sums,
                           jac_arg);
      if (jac_arg != nullptr) {
        for (std::size_t i = 0; i < w; ++i) {
          for (int c = 0; c < 3; ++c) jac[c][i] *= sx;
          for (int c = 3; c < 6; ++c) jac[c][i] *= sy;
        }
        if (fused) {
          for (std::size_t i = 0; i < w; ++i) {
            double e = 0.0;
            for (int c = 0; c < 6; ++c) e += jac[c][i] * jac[c][i];
            const double m = (*extras.util_mask)[p + i];
            util += m * m * e;
          }
        }
      }
      pair += w;
    }
    if (fused) (*extras.util_out)[idx] += util / static_cast<double>(width * height);

    // Chain rule from conic / opacity / adjusted colour to raw parameters.
    SplatParamVec& d = grad.splats[idx].d;
    d[0] += sums.d_mean_x;
    d[1] += sums.d_mean_y;
    const double c = std::cos(s.rotation);
    const double sn = std::sin(s.rotation);
    const double p0 = std::exp(-2.0 * s.log_scale[0]);
    const double p1 = std::exp(-2.0 * s.log_scale[1]);
    const double dp0 = sums.d_conic_a * c * c + sums.d_conic_b * c * sn + sums.d_conic_c * sn * sn;
    const double dp1 = sums.d_conic_a * sn * sn - sums.d_conic_b * c * sn + sums.d_conic_c * c * c;
    d[2] += -2.0 * p0 * dp0;
    d[3] += -2.0 * p1 * dp1;
    const double dpp = p0 - p1;
    d[4] += sums.d_conic_a * (-2.0 * c * sn * dpp) + sums.d_conic_b * (c * c - sn * sn) * dpp +
            sums.d_conic_c * (2.0 * c * sn * dpp);
    const double o = s.opacity();
    d[5] += sums.d_opacity * o * (1.0 - o);
    for (int ch = 0; ch < 3; ++ch) {
      const double raw = cache.raw_affine[idx][ch];
      if (raw > 0.0 && raw < 1.0) {
        const double dc = sums.d_color[ch];
        d[6 + ch] += dc * cache.glo_a[ch];
        d_a[ch] += dc * s.color[ch];
        d_b[ch] += dc;
      }
    }
  }

  if (cache.glo_cache.valid()) {
    std::vector<double> g_out(6);
    for (int ch = 0; ch < 3; ++ch) {
      g_out[ch] = d_a[ch];
      g_out[3 + ch] = d_b[ch];
    }
    if (grad.mapper.size() != model.appearance.mapper.param_count()) {
      grad.mapper.assign(model.appearance.mapper.param_count(), 0.0);
    }
    std::vector<double> g_in;
    model.appearance.mapper.backward(cache.glo_cache, g_out, grad.mapper, &g_in);
    if (grad.latent.size() != g_in.size()) grad.latent.assign(g_in.size(), 0.0);
    for (std::size_t i = 0; i < g_in.size(); ++i) grad.latent[i] += g_in[i];
  }
}

void UtilizationTracker::reset(std::size_t splats) {
  utilization.assign(splats, 0.0);
  window_steps = 0;
}

void accumulate_utilization(UtilizationTracker& tracker, const PositionGradients& grads,
                            const InlierMask& mask) {
  if (!mask.same_shape(grads.width, grads.height)) {
    throw std::invalid_argument("accumulate_utilization: mask size mismatch");
  }
  const std::size_t n = grads.boxes.size();
  if (tracker.utilization.size() != n) tracker.utilization.resize(n, 0.0);
  const double npix = static_cast<double>(grads.width) * grads.height;
  for (std::size_t g = 0; g < n; ++g) {
    const PixelBox& box = grads.boxes[g];
    if (box.empty()) continue;
    double sum = 0.0;
    std::size_t i = 0;
    for (int y = box.y0; y <= box.y1; ++y) {
      for (int x = box.x0; x <= box.x1; ++x, ++i) {
        double e = 0.0;
        for (int c = 0; c < 6; ++c) {
          const double v = grads.plane(g, c)[i];
          e += v * v;
        }
        const double m = mask(x, y);
        sum += m * m * e;
      }
    }
    tracker.utilization[g] += sum / npix;
  }
  ++tracker.window_steps;
}

std::vector<bool> prune(SplatModel& model, UtilizationTracker& tracker) {
  const std::size_t n = model.splats.size();
  if (tracker.utilization.size() != n) {
    throw std::logic_error("prune: tracker does not match the model");
  }
  std::vector<bool> keep(n);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    keep[i] = !(tracker.utilization[i] < tracker.kappa);
    kept += keep[i] ? 1 : 0;
  }
  if (kept == 0 && n > 0) {
    const auto best = std::max_element(tracker.utilization.begin(), tracker.utilization.end());
    keep[static_cast<std::size_t>(best - tracker.utilization.begin())] = true;
  }
  std::vector<Splat> survivors;
  survivors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) survivors.push_back(model.splats[i]);
  }
  model.splats = std::move(survivors);
  tracker.reset(model.splats.size());
  return keep;
}

}  // namespace sls
