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

#include "sls/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace sls {

void GenConfig::validate() const {
  if (width < 4 || height < 4) throw ConfigError("gen.width and gen.height must be >= 4");
  if (num_views < 1) throw ConfigError("gen.num_views must be >= 1");
  if (!(occupancy >= 0.0 && occupancy <= 0.6)) throw ConfigError("gen.occupancy must lie in [0, 0.6]");
  if (persistence < 1) throw ConfigError("gen.persistence must be >= 1");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw ConfigError("gen.jitter must lie in [0, 1)");
  if (!(camouflage_contrast >= 0.0)) throw ConfigError("gen.camouflage_contrast must be >= 0");
  if (!(camouflage_fraction >= 0.0 && camouflage_fraction <= 1.0)) {
    throw ConfigError("gen.camouflage_fraction must lie in [0, 1]");
  }
  if (!(spatial_bias >= 0.0 && spatial_bias <= 1.0)) throw ConfigError("gen.spatial_bias must lie in [0, 1]");
  if (!(hotspot_spread > 0.0)) throw ConfigError("gen.hotspot_spread must be > 0");
  if (blobs < 1) throw ConfigError("gen.blobs must be >= 1");
  if (!(edge_sharpness > 0.0 && edge_sharpness <= 1e4)) throw ConfigError("gen.edge_sharpness must lie in (0, 1e4]");
  if (feature_dim < 1) throw ConfigError("gen.feature_dim must be >= 1");
  if (!(feature_noise_sigma >= 0.0)) throw ConfigError("gen.feature_noise_sigma must be >= 0");
  if (!(semantic_fidelity >= 0.0 && semantic_fidelity <= 1.0)) {
    throw ConfigError("gen.semantic_fidelity must lie in [0, 1]");
  }
  if (feature_downsample < 1) throw ConfigError("gen.feature_downsample must be >= 1");
}

GenConfig preset_config(const std::string& name) {
  GenConfig c;
  if (name == "clean") {
    c.occupancy = 0.0;
  } else if (name == "easy") {
    c.occupancy = 0.10;
  } else if (name == "medium") {
    c.occupancy = 0.25;
  } else if (name == "hard") {
    c.occupancy = 0.44;
  } else if (name == "camouflage") {
    c.occupancy = 0.25;
    c.camouflage = true;
  } else {
    throw ConfigError("unknown gen.preset '" + name +
                      "' (expected clean|easy|medium|hard|camouflage)");
  }
  // Distractors stay put for a few consecutive views, like objects that
  // move through the capture.
  if (c.occupancy > 0.0) c.persistence = 4;
  return c;
}

std::vector<std::string> preset_names() {
  return {"clean", "easy", "medium", "hard", "camouflage"};
}

double SceneDataset::measured_occupancy() const {
  if (views.empty()) return 0.0;
  double sum = 0.0;
  for (const SceneView& v : views) {
    double s = 0.0;
    for (double m : v.gt_mask.data) s += m;
    sum += s / static_cast<double>(v.gt_mask.size());
  }
  return sum / static_cast<double>(views.size());
}

RgbImage SceneDataset::mean_image() const {
  RgbImage out(cfg.width, cfg.height, Rgb{0, 0, 0});
  if (views.empty()) return out;
  for (const SceneView& v : views) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (int c = 0; c < 3; ++c) out[i][c] += v.image[i][c];
    }
  }
  const double inv = 1.0 / static_cast<double>(views.size());
  for (auto& p : out.data) {
    for (double& c : p) c *= inv;
  }
  return out;
}

void quantize(RgbImage& img) {
  for (auto& p : img.data) {
    for (double& c : p) c = std::round(std::clamp(c, 0.0, 1.0) * 255.0) / 255.0;
  }
}

namespace {

enum Stream : std::uint64_t {
  kBaseStream = 1,
  kGainStream = 2,
  kDistractorStream = 3,
  kFeatureStream = 4,
  kProjectionStream = 5,
  kHotspotStream = 6,
};

Rgb random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

struct Distractor {
  bool disk = true;
  double cx = 0, cy = 0, rx = 0, ry = 0;  // pixels
  Rgb c0{}, c1{};
  double gx = 1, gy = 0;  // gradient direction
  bool camouflaged = false;
  double sx = 0, sy = 0;  // texture source offset, pixels
  Rgb offset{};           // shift of cells that repeat the local background
  double local_fraction = 0.0;
  std::uint64_t cell_key = 0;

  [[nodiscard]] bool covers(double x, double y) const {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return disk ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
  }
};

Distractor sample_distractor(Rng& rng, const GenConfig& cfg, double hx, double hy) {
  Distractor d;
  const double w = cfg.width, h = cfg.height;
  const double m = std::min(w, h);
  d.disk = rng.uniform() < 0.5;
  if (d.disk) {
    d.rx = d.ry = rng.uniform(0.08, 0.2) * m;
  } else {
    d.rx = rng.uniform(0.06, 0.2) * w;
    d.ry = rng.uniform(0.06, 0.2) * h;
  }
  if (rng.uniform() < cfg.spatial_bias) {
    d.cx = std::clamp(hx + cfg.hotspot_spread * rng.normal(), 0.0, 1.0) * w;
    d.cy = std::clamp(hy + cfg.hotspot_spread * rng.normal(), 0.0, 1.0) * h;
  } else {
    d.cx = rng.uniform() * w;
    d.cy = rng.uniform() * h;
  }
  d.c0 = random_color(rng, 0.0, 1.0);
  d.c1 = rng.uniform() < 0.5 ? d.c0 : random_color(rng, 0.0, 1.0);
  const double ang = rng.uniform(0.0, 2.0 * M_PI);
  d.gx = std::cos(ang);
  d.gy = std::sin(ang);
  d.camouflaged = cfg.camouflage;
  d.sx = rng.uniform(-0.5, 0.5) * w;
  d.sy = rng.uniform(-0.5, 0.5) * h;
  for (double& o : d.offset) o = rng.uniform(-cfg.camouflage_contrast, cfg.camouflage_contrast);
  d.local_fraction = cfg.camouflage_fraction;
  // The cell pattern is keyed on values already drawn, so the streams of
  // the other presets are unchanged.
  d.cell_key = mix64(std::bit_cast<std::uint64_t>(d.sx) ^ mix64(std::bit_cast<std::uint64_t>(d.sy)));
  return d;
}

Rgb distractor_color(const Distractor& d, const RgbImage& base, double x, double y) {
  if (d.camouflaged) {
    constexpr int kCell = 4;
    const int w = base.width, h = base.height;
    const int px = std::clamp(static_cast<int>(std::floor(x)), 0, w - 1);
    const int py = std::clamp(static_cast<int>(std::floor(y)), 0, h - 1);
    if (keyed_uniform(d.cell_key, static_cast<std::uint64_t>(py / kCell),
                      static_cast<std::uint64_t>(px / kCell)) < d.local_fraction) {
      const Rgb& b = base(px, py);
      return {b[0] + d.offset[0], b[1] + d.offset[1], b[2] + d.offset[2]};
    }
    const int sx = (((px + static_cast<int>(std::floor(d.sx))) % w) + w) % w;
    const int sy = (((py + static_cast<int>(std::floor(d.sy))) % h) + h) % h;
    return base(sx, sy);
  }
  const double t = std::clamp(0.5 + ((x - d.cx) * d.gx + (y - d.cy) * d.gy) / (2.0 * std::max(d.rx, d.ry)), 0.0, 1.0);
  return {d.c0[0] + t * (d.c1[0] - d.c0[0]), d.c0[1] + t * (d.c1[1] - d.c0[1]),
          d.c0[2] + t * (d.c1[2] - d.c0[2])};
}

ScalarImage coverage(const std::vector<Distractor>& ds, int w, int h) {
  ScalarImage m(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const Distractor& d : ds) {
        if (d.covers(x + 0.5, y + 0.5)) {
          m(x, y) = 1.0;
          break;
        }
      }
    }
  }
  return m;
}

double fraction(const ScalarImage& m) {
  double s = 0.0;
  for (double v : m.data) s += v;
  return s / static_cast<double>(m.size());
}

// Distractors of one persistence run: added until the covered fraction
// reaches the target, keeping whichever of the last two counts lands closer.
std::vector<Distractor> sample_run(Rng& rng, const GenConfig& cfg, double hx, double hy) {
  std::vector<Distractor> ds;
  if (cfg.occupancy <= 0.0) return ds;
  double covered = 0.0;
  for (int guard = 0; guard < 200 && covered < cfg.occupancy; ++guard) {
    ds.push_back(sample_distractor(rng, cfg, hx, hy));
    const double next = fraction(coverage(ds, cfg.width, cfg.height));
    if (next >= cfg.occupancy && next - cfg.occupancy > cfg.occupancy - covered && ds.size() > 1) {
      ds.pop_back();
      break;
    }
    covered = next;
  }
  return ds;
}

}  // namespace

RgbImage make_base_image(std::uint64_t seed, const GenConfig& cfg) {
  Rng rng(hash_key(seed, kBaseStream, 0));
  struct Blob {
    double mx, my, a, b, c;
    Rgb color;
  };
  std::vector<Blob> blobs;
  const double m = std::min(cfg.width, cfg.height);
  for (int k = 0; k < cfg.blobs; ++k) {
    const double s0 = m * std::exp(rng.uniform(std::log(0.03), std::log(0.25)));
    const double s1 = s0 * rng.uniform(0.4, 1.0);
    const double th = rng.uniform(0.0, M_PI);
    const double c = std::cos(th), s = std::sin(th);
    const double p0 = 1.0 / (s0 * s0), p1 = 1.0 / (s1 * s1);
    blobs.push_back({rng.uniform() * cfg.width, rng.uniform() * cfg.height,
                     c * c * p0 + s * s * p1, c * s * (p0 - p1), s * s * p0 + c * c * p1,
                     random_color(rng, 0.05, 0.95)});
  }
  const Rgb fill = random_color(rng, 0.3, 0.7);
  const double k = cfg.edge_sharpness;
  RgbImage img(cfg.width, cfg.height);
  std::vector<double> logit(blobs.size());
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      // Blend weights of the soft image raised to the power k and normalised
      // in log space; k -> inf tends to a partition into blob regions.
      const double fill_logit = k * std::log(1e-3);
      double top = fill_logit;
      for (std::size_t j = 0; j < blobs.size(); ++j) {
        const Blob& b = blobs[j];
        const double dx = x + 0.5 - b.mx, dy = y + 0.5 - b.my;
        const double q = b.a * dx * dx + 2.0 * b.b * dx * dy + b.c * dy * dy;
        logit[j] = -0.5 * k * q;
        top = std::max(top, logit[j]);
      }
      const double wf = std::exp(fill_logit - top);
      double wsum = wf;
      Rgb acc{fill[0] * wf, fill[1] * wf, fill[2] * wf};
      for (std::size_t j = 0; j < blobs.size(); ++j) {
        const double w = std::exp(logit[j] - top);
        wsum += w;
        for (int ch = 0; ch < 3; ++ch) acc[ch] += w * blobs[j].color[ch];
      }
      img(x, y) = {acc[0] / wsum, acc[1] / wsum, acc[2] / wsum};
    }
  }
  return img;
}

FeatureMap positional_encoding(int height, int width, int degree) {
  if (degree < 1) throw std::invalid_argument("positional_encoding: degree must be >= 1");
  FeatureMap f(width, height, 4 * degree);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width;
      const double v = static_cast<double>(y) / height;
      double* p = f.pixel(static_cast<std::size_t>(y) * width + x);
      for (int k = 0; k < degree; ++k) {
        const double f_k = std::ldexp(M_PI, k);
        p[4 * k + 0] = std::sin(f_k * u);
        p[4 * k + 1] = std::cos(f_k * u);
        p[4 * k + 2] = std::sin(f_k * v);
        p[4 * k + 3] = std::cos(f_k * v);
      }
    }
  }
  return f;
}

namespace {

// Box average over f x f blocks, then bilinear interpolation back to full
// resolution at block-centre sample positions.
FeatureMap resample(const FeatureMap& in, int f) {
  if (f <= 1) return in;
  const int w = in.width, h = in.height, c = in.channels;
  const int lw = (w + f - 1) / f, lh = (h + f - 1) / f;
  FeatureMap low(lw, lh, c);
  std::vector<double> count(static_cast<std::size_t>(lw) * lh, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t li = static_cast<std::size_t>(y / f) * lw + x / f;
      const double* p = in.pixel(static_cast<std::size_t>(y) * w + x);
      double* q = low.pixel(li);
      for (int k = 0; k < c; ++k) q[k] += p[k];
      count[li] += 1.0;
    }
  }
  for (std::size_t i = 0; i < count.size(); ++i) {
    double* q = low.pixel(i);
    for (int k = 0; k < c; ++k) q[k] /= count[i];
  }
  FeatureMap out(w, h, c);
  for (int y = 0; y < h; ++y) {
    const double ly = std::clamp((y + 0.5) / f - 0.5, 0.0, lh - 1.0);
    const int y0 = static_cast<int>(std::floor(ly));
    const int y1 = std::min(y0 + 1, lh - 1);
    const double ty = ly - y0;
    for (int x = 0; x < w; ++x) {
      const double lx = std::clamp((x + 0.5) / f - 0.5, 0.0, lw - 1.0);
      const int x0 = static_cast<int>(std::floor(lx));
      const int x1 = std::min(x0 + 1, lw - 1);
      const double tx = lx - x0;
      const double* a = low.pixel(static_cast<std::size_t>(y0) * lw + x0);
      const double* b = low.pixel(static_cast<std::size_t>(y0) * lw + x1);
      const double* cc = low.pixel(static_cast<std::size_t>(y1) * lw + x0);
      const double* d = low.pixel(static_cast<std::size_t>(y1) * lw + x1);
      double* o = out.pixel(static_cast<std::size_t>(y) * w + x);
      for (int k = 0; k < c; ++k) {
        o[k] = (1 - ty) * ((1 - tx) * a[k] + tx * b[k]) + ty * ((1 - tx) * cc[k] + tx * d[k]);
      }
    }
  }
  return out;
}

}  // namespace

FeatureMap synth_features(const RgbImage& view, const ScalarImage& gt_mask,
                          const GenConfig& cfg, std::uint64_t seed, int view_id) {
  if (!view.same_shape(gt_mask)) throw std::invalid_argument("synth_features: size mismatch");
  const int w = view.width, h = view.height, c = cfg.feature_dim;
  // The projection is a property of the scene, shared by every view.
  Rng prng(hash_key(seed, kProjectionStream, 0));
  std::vector<double> proj(static_cast<std::size_t>(std::max(c - 1, 0)) * 3);
  for (double& p : proj) p = prng.normal() / std::sqrt(3.0);

  FeatureMap f(w, h, c);
  for (std::size_t i = 0; i < f.pixels(); ++i) {
    double* p = f.pixel(i);
    double sem = gt_mask[i] > 0.5 ? 1.0 : 0.0;
    if (keyed_uniform(hash_key(seed, kFeatureStream, static_cast<std::uint64_t>(view_id)), 0, i) >=
        cfg.semantic_fidelity) {
      sem = 1.0 - sem;
    }
    p[0] = sem;
    for (int k = 1; k < c; ++k) {
      const double* row = proj.data() + static_cast<std::size_t>(k - 1) * 3;
      p[k] = row[0] * (view[i][0] - 0.5) + row[1] * (view[i][1] - 0.5) + row[2] * (view[i][2] - 0.5);
    }
  }
  if (cfg.feature_noise_sigma > 0.0) {
    Rng nrng(hash_key(seed, kFeatureStream, 1000003ULL + static_cast<std::uint64_t>(view_id)));
    for (double& v : f.data) v += cfg.feature_noise_sigma * nrng.normal();
  }
  FeatureMap out = resample(f, cfg.feature_downsample);
  for (double& v : out.data) v = static_cast<double>(static_cast<float>(v));
  return out;
}

SceneDataset generate_scene(std::uint64_t seed, const GenConfig& cfg) {
  cfg.validate();
  SceneDataset ds;
  ds.cfg = cfg;
  ds.seed = seed;
  ds.base = make_base_image(seed, cfg);
  Rng hot(hash_key(seed, kHotspotStream, 0));
  const double hx = hot.uniform(0.25, 0.75), hy = hot.uniform(0.25, 0.75);

  std::vector<Distractor> run;
  for (int v = 0; v < cfg.num_views; ++v) {
    if (v % cfg.persistence == 0) {
      Rng rng(hash_key(seed, kDistractorStream, static_cast<std::uint64_t>(v / cfg.persistence)));
      run = sample_run(rng, cfg, hx, hy);
    }
    SceneView view;
    view.id = v;
    Rng grng(hash_key(seed, kGainStream, static_cast<std::uint64_t>(v)));
    Rgb gain;
    for (double& g : gain) g = 1.0 + cfg.jitter * grng.uniform(-1.0, 1.0);
    view.clean = RgbImage(cfg.width, cfg.height);
    for (std::size_t i = 0; i < ds.base.size(); ++i) {
      for (int ch = 0; ch < 3; ++ch) view.clean[i][ch] = ds.base[i][ch] * gain[ch];
    }
    quantize(view.clean);
    view.image = view.clean;
    view.gt_mask = ScalarImage(cfg.width, cfg.height, 0.0);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        // Later distractors are drawn on top.
        for (auto it = run.rbegin(); it != run.rend(); ++it) {
          if (!it->covers(x + 0.5, y + 0.5)) continue;
          Rgb col = distractor_color(*it, ds.base, x + 0.5, y + 0.5);
          for (int ch = 0; ch < 3; ++ch) col[ch] *= gain[ch];
          view.image(x, y) = col;
          view.gt_mask(x, y) = 1.0;
          break;
        }
      }
    }
    quantize(view.image);
    view.features = synth_features(view.image, view.gt_mask, cfg, seed, v);
    ds.views.push_back(std::move(view));
  }
  return ds;
}

}  // namespace sls
