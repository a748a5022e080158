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
#include <cstdint>
#include <vector>

#include "sls/common.hpp"
#include "sls/smallnet.hpp"

namespace sls {

// 2D anisotropic Gaussian with opacity and flat colour. Positions and scales
// are in normalised image coordinates: pixel (x, y) has centre
// ((x + 0.5) / W, (y + 0.5) / H).
struct Splat {
  std::array<double, 2> mean{0.5, 0.5};
  std::array<double, 2> log_scale{-3.0, -3.0};
  double rotation = 0.0;
  double opacity_logit = 0.0;
  Rgb color{0.5, 0.5, 0.5};
  // Compositing key, smaller is in front; not trained.
  double depth = 0.0;

  [[nodiscard]] double opacity() const;
  bool operator==(const Splat&) const = default;
};

// Trainable fields in a fixed order: mean x/y, log-scale 0/1, rotation,
// opacity logit, colour r/g/b.
inline constexpr int kSplatParams = 9;
using SplatParamVec = std::array<double, kSplatParams>;
double& splat_param(Splat& s, int k);
double splat_param(const Splat& s, int k);

struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
};

// R(theta) diag(exp(2 * log_scale)) R(theta)^T.
Sym2 covariance(const Splat& s);

struct GloConfig {
  bool enabled = false;
  int latent_dim = 8;
  int hidden = 16;
};

// Per-view affine colour correction: (a - 1, b) = mapper(z_view), applied as
// clamp(a * c + b, 0, 1). The mapper's last layer starts at zero, so every
// view starts at the identity.
struct Appearance {
  GloConfig cfg;
  std::vector<std::vector<double>> latents;
  DenseNet mapper;

  void init(int views, std::uint64_t seed);
  // (a, b) for a view; identity when disabled or view < 0.
  [[nodiscard]] std::pair<Rgb, Rgb> affine(int view) const;
};

struct SplatModel {
  std::vector<Splat> splats;
  Appearance appearance;
  Rgb background{0.5, 0.5, 0.5};
};

// Splat-adjusted colours for one view (view < 0 means identity appearance).
std::vector<Rgb> apply_glo(const SplatModel& model, int view);

// Uniform grid of `count` splats jittered by a fraction of the spacing;
// colours are read from `mean_image` at the splat centres, scales are 4 px
// and depths are random.
SplatModel init_model(const RgbImage& mean_image, int count, int views,
                      const GloConfig& glo, std::uint64_t seed);

// Inclusive pixel rectangle covered by the splat's 3-sigma bounding box;
// empty() when the box misses the image.
struct PixelBox {
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
  [[nodiscard]] bool empty() const { return x1 < x0 || y1 < y0; }
  [[nodiscard]] int width() const { return x1 - x0 + 1; }
  [[nodiscard]] int height() const { return y1 - y0 + 1; }
  [[nodiscard]] std::size_t area() const {
    return empty() ? 0 : static_cast<std::size_t>(width()) * height();
  }
};
PixelBox pixel_box(const Splat& s, int width, int height);

// Values kept by render() for render_backward().
struct RenderCache {
  int width = 0, height = 0, view = -1;
  std::vector<int> order;           // splat indices front to back
  std::vector<PixelBox> boxes;      // per splat index
  std::vector<std::size_t> offset;  // per splat index, into gauss/trans
  std::vector<double> gauss;        // gaussian value per (splat, pixel)
  std::vector<double> trans;        // incoming transmittance per (splat, pixel)
  std::vector<double> final_trans;  // per pixel
  std::vector<Rgb> colors;          // GLO-adjusted, clamped
  std::vector<Rgb> raw_affine;      // a*c+b before clamping
  Rgb glo_a{1, 1, 1}, glo_b{0, 0, 0};
  DenseNet::Cache glo_cache;
  [[nodiscard]] bool valid() const { return width > 0; }
};

// Depth-sorted (ties by index) front-to-back alpha compositing over a fixed
// mid-grey background. Gaussians are evaluated inside their 3-sigma box only.
RgbImage render(const SplatModel& model, int view, int width, int height,
                RenderCache* cache = nullptr);

struct SplatGrad {
  SplatParamVec d{};
};

struct ModelGrad {
  std::vector<SplatGrad> splats;
  std::vector<double> latent;  // gradient of the rendered view's latent
  std::vector<double> mapper;  // gradient of the GLO mapper parameters

  void reset(const SplatModel& model);
};

// dI/dx_g for every splat: six planes (dR, dG, dB w.r.t. x, then w.r.t. y)
// over the splat's pixel box, with x_g the splat centre in pixel units.
struct PositionGradients {
  int width = 0, height = 0;
  std::vector<PixelBox> boxes;
  std::vector<std::size_t> offset;
  std::vector<double> values;  // 6 * area per splat

  [[nodiscard]] const double* plane(std::size_t splat, int k) const {
    return values.data() + offset[splat] + static_cast<std::size_t>(k) * boxes[splat].area();
  }
};

struct BackwardExtras {
  PositionGradients* position_grads = nullptr;
  // Fused utilization: util_out[g] += mean_pixels ||mask * dI/dx_g||^2.
  const InlierMask* util_mask = nullptr;
  std::vector<double>* util_out = nullptr;
};

// Exact reverse of render(): accumulates d(sum grad_image * I)/d(params)
// into `grad`. Throws std::logic_error without a matching cache.
void render_backward(const SplatModel& model, const RenderCache& cache,
                     const RgbImage& grad_image, ModelGrad& grad,
                     const BackwardExtras& extras = {});

// Utilization-based pruning bookkeeping.
struct UtilizationTracker {
  std::vector<double> utilization;
  int window_steps = 0;
  int period = 100;
  double kappa = 1e-7;

  void reset(std::size_t splats);
};

// u_g += mean over all pixels of ||mask * dI/dx_g||^2 for the current view.
void accumulate_utilization(UtilizationTracker& tracker, const PositionGradients& grads,
                            const InlierMask& mask);

// Removes splats with u_g < kappa (never the last one) and resets the
// tracker. Returns, for every original splat, whether it was kept.
std::vector<bool> prune(SplatModel& model, UtilizationTracker& tracker);

}  // namespace sls
