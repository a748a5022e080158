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
#include <functional>
#include <string>
#include <vector>

#include "sls/common.hpp"
#include "sls/datagen.hpp"
#include "sls/residual_stats.hpp"
#include "sls/robust_kernels.hpp"
#include "sls/robust_mask.hpp"
#include "sls/semantic_mask.hpp"
#include "sls/smallnet.hpp"
#include "sls/splat2d.hpp"

namespace sls {

struct UbpConfig {
  bool enabled = false;
  int start = 500;
  int stop = 1500;
  int period = 100;
  double kappa = 1e-7;
};

struct OptimConfig {
  double lr_mean = 2e-3;
  double lr_scale = 5e-3;
  double lr_rotation = 5e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  double lr_glo = 1e-3;
  // Splat learning rates decay exponentially to this fraction at the last
  // step, as 3DGS does for positions.
  double final_lr_ratio = 0.1;
};

struct TrainConfig {
  int steps = 3000;
  int splats = 1500;
  int eval_every = 100;
  std::uint64_t seed = 0;
  MaskMode mode = MaskMode::kRobustFilter;
  MaskConfig mask;
  HistogramConfig hist;
  SlsConfig sls;
  UbpConfig ubp;
  GloConfig glo;
  OptimConfig optim;
  kernels::RobustKernel kernel{kernels::KernelKind::kL1, 1.0};
  // Compute the mask from the histogram before adding the current residuals.
  bool mask_before_hist = false;
  // Visit views in a seeded per-epoch permutation instead of round-robin.
  bool shuffle = false;

  void validate() const;
};

struct LogRow {
  int step = 0;
  double psnr = 0.0;
  double loss = 0.0;
  double iou = 0.0;
  int splats = 0;
  double alpha = 1.0;

  bool operator==(const LogRow&) const = default;
};

struct TrainLog {
  std::vector<LogRow> rows;
};

struct MaskedLoss {
  double loss = 0.0;
  RgbImage grad;         // d loss / d rendered
  ScalarImage residual;  // channel-mean |rendered - target|
  bool empty_mask = false;
};

// sum_p mask * mean_c kappa(rendered - target) / sum_p mask, with gradient
// mask * kappa'(.) / (3 sum mask). An all-zero mask gives zero loss and
// gradient and sets empty_mask.
MaskedLoss masked_loss(const RgbImage& rendered, const RgbImage& target,
                       const InlierMask& mask, const kernels::RobustKernel& kernel);
MaskedLoss masked_l1(const RgbImage& rendered, const RgbImage& target, const InlierMask& mask);

// Channel-mean absolute error per pixel.
ScalarImage residual_image(const RgbImage& rendered, const RgbImage& target);

// 10 log10(1 / MSE), capped at 99 dB.
double psnr(const RgbImage& a, const RgbImage& b);
inline constexpr double kPsnrCap = 99.0;

// IoU of the predicted outlier set {mask < 0.5} against the GT distractor set
// {gt > 0.5}; 1 when both are empty.
double mask_iou(const InlierMask& inliers, const ScalarImage& gt_distractor);

// Everything the optimisation carries between steps.
struct TrainState {
  int step = 0;  // number of completed steps
  SplatModel model;
  ResidualHistogram hist;
  DenseNet classifier;
};

// Per-view data derived once from the dataset.
struct TrainContext {
  const SceneDataset* data = nullptr;
  FeatureMap pe;                    // positional channels (sls_mlp)
  std::vector<ClusterMap> clusters; // per view (sls_agg)
};

TrainContext make_context(const SceneDataset& data, const TrainConfig& cfg);
TrainState init_state(const SceneDataset& data, const TrainConfig& cfg);

// Deterministic mask* for a view: the mode's inlier mask before warm-up
// sampling. Does not modify the state.
InlierMask predicted_mask(const TrainState& state, const TrainContext& ctx,
                          const TrainConfig& cfg, int view, const ScalarImage& residual);

// predicted_mask() as used for evaluation: all inliers while the histogram is
// still empty in the modes that need it.
InlierMask eval_mask(const TrainState& state, const TrainContext& ctx, const TrainConfig& cfg,
                     int view, const ScalarImage& residual);

struct EvalRecord {
  LogRow row;
  double psnr_identity = 0.0;     // identity appearance vs the base image
  std::vector<double> view_psnr;  // per view
  std::vector<double> view_iou;
};

// Metrics of the current state over every view. Pure in its inputs; views
// are processed in parallel (SLS_THREADS caps the thread count).
EvalRecord evaluate(const TrainState& state, const TrainContext& ctx, const TrainConfig& cfg);

struct TrainHooks {
  // Called after every evaluation with the record, the state and the context.
  std::function<void(const EvalRecord&, const TrainState&, const TrainContext&)> on_eval;
};

struct TrainResult {
  TrainState state;
  TrainLog log;
};

// Runs cfg.steps optimisation steps. Throws NumericalError on a non-finite
// loss.
TrainResult train(const SceneDataset& data, const TrainConfig& cfg, const TrainHooks& hooks = {});

// Number of worker threads for data-parallel loops: SLS_THREADS if set,
// otherwise the hardware concurrency.
int worker_threads();

}  // namespace sls
