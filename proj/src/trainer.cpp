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

#include "sls/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace sls {

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("trainer.steps must be >= 1");
  if (splats < 1) throw ConfigError("trainer.splats must be >= 1");
  if (eval_every < 1) throw ConfigError("trainer.eval_every must be >= 1");
  mask.validate();
  sls.validate();
  if (!(hist.bucket_width > 0.0 && hist.max_residual > hist.bucket_width)) {
    throw ConfigError("hist.bucket_width must be > 0 and below hist.max_residual");
  }
  if (!(hist.discount > 0.0 && hist.discount <= 1.0)) throw ConfigError("hist.discount must lie in (0, 1]");
  if (ubp.stop < ubp.start) throw ConfigError("ubp.stop must be >= ubp.start");
  if (ubp.period < 1) throw ConfigError("ubp.period must be >= 1");
  if (!(ubp.kappa >= 0.0)) throw ConfigError("ubp.kappa must be >= 0");
  if (!(optim.final_lr_ratio > 0.0 && optim.final_lr_ratio <= 1.0)) {
    throw ConfigError("optim.final_lr_ratio must lie in (0, 1]");
  }
  if (glo.latent_dim < 1 || glo.hidden < 1) throw ConfigError("glo.latent_dim and glo.hidden must be >= 1");
  if (kernel.kind != kernels::KernelKind::kL1 && kernel.kind != kernels::KernelKind::kL2 &&
      !(kernel.scale_c > 0.0)) {
    throw ConfigError("loss.kernel_scale must be > 0");
  }
}

ScalarImage residual_image(const RgbImage& rendered, const RgbImage& target) {
  if (!rendered.same_shape(target)) throw std::invalid_argument("residual_image: size mismatch");
  ScalarImage r(rendered.width, rendered.height);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = (std::abs(rendered[i][0] - target[i][0]) + std::abs(rendered[i][1] - target[i][1]) +
            std::abs(rendered[i][2] - target[i][2])) / 3.0;
  }
  return r;
}

MaskedLoss masked_loss(const RgbImage& rendered, const RgbImage& target,
                       const InlierMask& mask, const kernels::RobustKernel& kernel) {
  if (!rendered.same_shape(target) || !rendered.same_shape(mask)) {
    throw std::invalid_argument("masked_loss: size mismatch");
  }
  MaskedLoss out;
  out.residual = residual_image(rendered, target);
  out.grad = RgbImage(rendered.width, rendered.height, Rgb{0, 0, 0});
  double msum = 0.0;
  for (double m : mask.data) msum += m;
  if (msum <= 0.0) {
    out.empty_mask = true;
    return out;
  }
  double acc = 0.0;
  const double inv = 1.0 / (3.0 * msum);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double m = mask[i];
    if (m == 0.0) continue;
    double per = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double e = rendered[i][c] - target[i][c];
      per += kernels::kernel_value(kernel, e);
      out.grad[i][c] = m * kernels::kernel_derivative(kernel, e) * inv;
    }
    acc += m * per / 3.0;
  }
  out.loss = acc / msum;
  return out;
}

MaskedLoss masked_l1(const RgbImage& rendered, const RgbImage& target, const InlierMask& mask) {
  return masked_loss(rendered, target, mask, {kernels::KernelKind::kL1, 1.0});
}

double psnr(const RgbImage& a, const RgbImage& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: size mismatch");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = a[i][c] - b[i][c];
      se += d * d;
    }
  }
  const double mse = se / (3.0 * static_cast<double>(a.size()));
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double mask_iou(const InlierMask& inliers, const ScalarImage& gt_distractor) {
  if (!inliers.same_shape(gt_distractor)) throw std::invalid_argument("mask_iou: size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < inliers.size(); ++i) {
    const bool p = inliers[i] < 0.5;
    const bool g = gt_distractor[i] > 0.5;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

int worker_threads() {
  if (const char* env = std::getenv("SLS_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs fn(i) for i in [0, n) on up to worker_threads() threads. Each index is
// handled by exactly one thread, so results stored per index are
// independent of the schedule.
template <typename Fn>
void parallel_for(int n, Fn fn) {
  const int threads = std::min(worker_threads(), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

void require_finite(const ScalarImage& residual, const std::string& where, int view) {
  for (double r : residual.data) {
    if (!std::isfinite(r)) {
      throw NumericalError("non-finite residual at " + where + " (view " + std::to_string(view) + ")");
    }
  }
}

FeatureMap classifier_input(const TrainContext& ctx, int view) {
  const FeatureMap& f = ctx.data->views[static_cast<std::size_t>(view)].features;
  return ctx.pe.channels > 0 ? concat_channels(f, ctx.pe) : f;
}

int classifier_dim(const SceneDataset& data, const TrainConfig& cfg) {
  const int c = data.views.empty() ? data.cfg.feature_dim : data.views[0].features.channels;
  return c + 4 * cfg.sls.pe_degree;
}

}  // namespace

TrainContext make_context(const SceneDataset& data, const TrainConfig& cfg) {
  TrainContext ctx;
  ctx.data = &data;
  if (cfg.mode == MaskMode::kSlsMlp && cfg.sls.pe_degree > 0) {
    ctx.pe = positional_encoding(data.height(), data.width(), cfg.sls.pe_degree);
  }
  if (cfg.mode == MaskMode::kSlsAgg) {
    ctx.clusters.resize(data.views.size());
    const int target = std::min(cfg.sls.clusters, data.width() * data.height());
    parallel_for(static_cast<int>(data.views.size()), [&](int v) {
      ctx.clusters[static_cast<std::size_t>(v)] =
          agglomerate(data.views[static_cast<std::size_t>(v)].features, target);
    });
  }
  return ctx;
}

TrainState init_state(const SceneDataset& data, const TrainConfig& cfg) {
  if (data.views.empty()) throw DataError("dataset has no views");
  TrainState s;
  s.model = init_model(data.mean_image(), cfg.splats, static_cast<int>(data.views.size()),
                       cfg.glo, hash_key(cfg.seed, 0x5e1a7, 1));
  s.hist = ResidualHistogram(cfg.hist);
  if (cfg.mode == MaskMode::kSlsMlp) {
    s.classifier = make_classifier(classifier_dim(data, cfg), cfg.sls, hash_key(cfg.seed, 0x5e1a7, 2));
  }
  return s;
}

InlierMask predicted_mask(const TrainState& state, const TrainContext& ctx,
                          const TrainConfig& cfg, int view, const ScalarImage& residual) {
  switch (cfg.mode) {
    case MaskMode::kNone:
      return InlierMask(residual.width, residual.height, 1.0);
    case MaskMode::kTrim:
      return trim_mask(residual, state.hist.quantile(cfg.mask.tau));
    case MaskMode::kRobustFilter:
      return robust_filter(residual, state.hist, cfg.mask);
    case MaskMode::kSlsAgg:
      return cluster_vote(ctx.clusters.at(static_cast<std::size_t>(view)),
                          robust_filter(residual, state.hist, cfg.mask));
    case MaskMode::kSlsMlp:
      return mlp_mask(state.classifier, classifier_input(ctx, view));
  }
  throw std::logic_error("predicted_mask: unknown mode");
}

InlierMask eval_mask(const TrainState& state, const TrainContext& ctx, const TrainConfig& cfg,
                     int view, const ScalarImage& residual) {
  const bool needs_hist = cfg.mode != MaskMode::kNone && cfg.mode != MaskMode::kSlsMlp;
  if (needs_hist && state.hist.empty()) return InlierMask(residual.width, residual.height, 1.0);
  return predicted_mask(state, ctx, cfg, view, residual);
}

EvalRecord evaluate(const TrainState& state, const TrainContext& ctx, const TrainConfig& cfg) {
  const SceneDataset& data = *ctx.data;
  const int n = static_cast<int>(data.views.size());
  const int w = data.width(), h = data.height();
  EvalRecord rec;
  rec.view_psnr.assign(static_cast<std::size_t>(n), 0.0);
  rec.view_iou.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> view_loss(static_cast<std::size_t>(n), 0.0);
  parallel_for(n, [&](int v) {
    const SceneView& sv = data.views[static_cast<std::size_t>(v)];
    const RgbImage img = render(state.model, v, w, h);
    rec.view_psnr[v] = psnr(img, sv.clean);
    const ScalarImage res = residual_image(img, sv.image);
    require_finite(res, "evaluation", v);
    const InlierMask m = eval_mask(state, ctx, cfg, v, res);
    rec.view_iou[v] = mask_iou(m, sv.gt_mask);
    view_loss[v] = masked_loss(img, sv.image, m, cfg.kernel).loss;
  });
  double p = 0, l = 0, iou = 0;
  for (int v = 0; v < n; ++v) {
    p += rec.view_psnr[v];
    l += view_loss[v];
    iou += rec.view_iou[v];
  }
  RgbImage base = data.base;
  quantize(base);
  rec.psnr_identity = psnr(render(state.model, -1, w, h), base);
  rec.row.step = state.step;
  rec.row.psnr = p / n;
  rec.row.loss = l / n;
  rec.row.iou = iou / n;
  rec.row.splats = static_cast<int>(state.model.splats.size());
  rec.row.alpha = schedule_alpha(state.step, cfg.mask);
  return rec;
}

namespace {

constexpr double kMinLogScale = -9.1;   // just above ln(1e-4)
constexpr double kMaxLogScale = -0.01;  // just below ln(1)
constexpr double kMaxLogit = 15.0;

struct Optimizer {
  AdamConfig cfg;
  std::vector<std::array<double, kSplatParams>> m, v;
  std::vector<std::vector<double>> latent_m, latent_v;
  Adam mapper;
  Adam classifier;
};

void clamp_splat(Splat& s) {
  for (double& l : s.log_scale) l = std::clamp(l, kMinLogScale, kMaxLogScale);
  s.opacity_logit = std::clamp(s.opacity_logit, -kMaxLogit, kMaxLogit);
  for (double& c : s.color) c = std::clamp(c, 0.0, 1.0);
}

int view_for_step(const TrainConfig& cfg, int step, int views) {
  if (!cfg.shuffle) return step % views;
  const int epoch = step / views;
  std::vector<int> perm(static_cast<std::size_t>(views));
  for (int i = 0; i < views; ++i) perm[i] = i;
  Rng rng(hash_key(cfg.seed, 0x5f1e, static_cast<std::uint64_t>(epoch)));
  for (int i = views - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
  }
  return perm[static_cast<std::size_t>(step % views)];
}

std::vector<std::size_t> sample_pixels(const TrainConfig& cfg, int step, std::size_t npix) {
  const std::size_t k = static_cast<std::size_t>(cfg.sls.train_pixels);
  std::vector<std::size_t> out;
  if (k == 0 || k >= npix) {
    out.resize(npix);
    for (std::size_t i = 0; i < npix; ++i) out[i] = i;
    return out;
  }
  out.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = hash_key(cfg.seed ^ 0xc1a55ULL, static_cast<std::uint64_t>(step), i) % npix;
  }
  return out;
}

}  // namespace

TrainResult train(const SceneDataset& data, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (data.views.empty()) throw DataError("dataset has no views");
  const int views = static_cast<int>(data.views.size());
  const int w = data.width(), h = data.height();
  const TrainContext ctx = make_context(data, cfg);

  TrainResult result;
  TrainState& st = result.state;
  st = init_state(data, cfg);

  Optimizer opt;
  opt.m.assign(st.model.splats.size(), {});
  opt.v.assign(st.model.splats.size(), {});
  opt.latent_m.assign(st.model.appearance.latents.size(),
                      std::vector<double>(static_cast<std::size_t>(cfg.glo.latent_dim), 0.0));
  opt.latent_v = opt.latent_m;
  opt.mapper = Adam(st.model.appearance.mapper.param_count(), AdamConfig{cfg.optim.lr_glo});
  opt.classifier = Adam(st.classifier.param_count(), AdamConfig{cfg.sls.lr});
  const double lrs[kSplatParams] = {cfg.optim.lr_mean,     cfg.optim.lr_mean,   cfg.optim.lr_scale,
                                    cfg.optim.lr_scale,    cfg.optim.lr_rotation, cfg.optim.lr_opacity,
                                    cfg.optim.lr_color,    cfg.optim.lr_color,  cfg.optim.lr_color};

  UtilizationTracker tracker;
  tracker.period = cfg.ubp.period;
  tracker.kappa = cfg.ubp.kappa;
  tracker.reset(st.model.splats.size());

  auto log_eval = [&]() {
    const EvalRecord rec = evaluate(st, ctx, cfg);
    result.log.rows.push_back(rec.row);
    if (hooks.on_eval) hooks.on_eval(rec, st, ctx);
  };
  log_eval();

  RenderCache cache;
  ModelGrad grad;
  bool warned_empty = false;
  for (int t = 0; t < cfg.steps; ++t) {
    const int v = view_for_step(cfg, t, views);
    const SceneView& sv = data.views[static_cast<std::size_t>(v)];
    const RgbImage img = render(st.model, v, w, h, &cache);
    const ScalarImage res = residual_image(img, sv.image);
    require_finite(res, "step " + std::to_string(t), v);

    InlierMask mask_star;
    if (cfg.mode == MaskMode::kNone) {
      mask_star = InlierMask(w, h, 1.0);
    } else {
      if (!cfg.mask_before_hist) st.hist.update(res.data);
      if (st.hist.empty()) st.hist.update(res.data);
      mask_star = predicted_mask(st, ctx, cfg, v, res);
      if (cfg.mode == MaskMode::kSlsMlp) {
        const FeatureMap input = classifier_input(ctx, v);
        const HingeLabels labels = make_labels(res, st.hist, cfg.mask, cfg.sls);
        const std::vector<std::size_t> pixels = sample_pixels(cfg, t, res.size());
        std::vector<double> g = hinge_gradient(st.classifier, input, labels, &pixels);
        st.classifier.add_lipschitz_penalty_grad(cfg.sls.lambda, g);
        opt.classifier.step(st.classifier.params(), g);
      }
      if (cfg.mask_before_hist) st.hist.update(res.data);
    }

    const double alpha = schedule_alpha(t, cfg.mask);
    const InlierMask lambda = cfg.mode == MaskMode::kNone
                                  ? mask_star
                                  : bernoulli_mask(mask_star, alpha, cfg.seed, static_cast<std::uint64_t>(t));
    const MaskedLoss loss = masked_loss(img, sv.image, lambda, cfg.kernel);
    if (loss.empty_mask && !warned_empty) {
      std::fprintf(stderr, "warning: empty inlier mask at step %d (view %d); step skipped\n", t, v);
      warned_empty = true;
    }
    if (!std::isfinite(loss.loss)) {
      throw NumericalError("non-finite loss at step " + std::to_string(t) + " (view " +
                           std::to_string(v) + ")");
    }

    grad.reset(st.model);
    const bool in_ubp = cfg.ubp.enabled && t >= cfg.ubp.start && t < cfg.ubp.stop;
    std::vector<double> util;
    BackwardExtras extras;
    if (in_ubp) {
      util.assign(st.model.splats.size(), 0.0);
      extras.util_mask = &lambda;
      extras.util_out = &util;
    }
    render_backward(st.model, cache, loss.grad, grad, extras);

    const std::int64_t step = t + 1;
    const double decay =
        cfg.steps > 1 ? std::pow(cfg.optim.final_lr_ratio, static_cast<double>(t) / (cfg.steps - 1)) : 1.0;
    for (std::size_t i = 0; i < st.model.splats.size(); ++i) {
      Splat& s = st.model.splats[i];
      for (int k = 0; k < kSplatParams; ++k) {
        adam_update(splat_param(s, k), grad.splats[i].d[k], opt.m[i][k], opt.v[i][k],
                    lrs[k] * decay, opt.cfg, step);
      }
      clamp_splat(s);
    }
    if (st.model.appearance.cfg.enabled) {
      auto& z = st.model.appearance.latents[static_cast<std::size_t>(v)];
      for (std::size_t k = 0; k < z.size(); ++k) {
        adam_update(z[k], grad.latent[k], opt.latent_m[v][k], opt.latent_v[v][k],
                    cfg.optim.lr_glo, opt.cfg, step);
      }
      opt.mapper.step(st.model.appearance.mapper.params(), grad.mapper);
    }

    if (in_ubp) {
      for (std::size_t i = 0; i < util.size(); ++i) tracker.utilization[i] += util[i];
      ++tracker.window_steps;
      if ((t + 1 - cfg.ubp.start) % cfg.ubp.period == 0) {
        const std::vector<bool> keep = prune(st.model, tracker);
        std::size_t j = 0;
        for (std::size_t i = 0; i < keep.size(); ++i) {
          if (!keep[i]) continue;
          opt.m[j] = opt.m[i];
          opt.v[j] = opt.v[i];
          ++j;
        }
        opt.m.resize(j);
        opt.v.resize(j);
      }
    }

    st.step = t + 1;
    if (st.step % cfg.eval_every == 0) log_eval();
  }
  // The last row always describes the returned state.
  if (cfg.steps % cfg.eval_every != 0) log_eval();
  return result;
}

}  // namespace sls
