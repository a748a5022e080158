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

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "sls/common.hpp"
#include "sls/datagen.hpp"
#include "sls/trainer.hpp"

using namespace sls;

namespace {

SceneDataset tiny_scene(const std::string& preset, std::uint64_t seed = 1) {
  GenConfig g = preset_config(preset);
  g.width = 24;
  g.height = 24;
  g.num_views = 6;
  return generate_scene(seed, g);
}

TrainConfig tiny_config(MaskMode mode) {
  TrainConfig c;
  c.steps = 40;
  c.splats = 60;
  c.eval_every = 10;
  c.seed = 3;
  c.mode = mode;
  c.sls.clusters = 20;
  c.sls.pe_degree = 2;
  c.sls.hidden = {8, 8};
  c.sls.train_pixels = 64;
  return c;
}

RgbImage constant(int w, int h, double v) { return RgbImage(w, h, Rgb{v, v, v}); }

}  // namespace

TEST_CASE("masked_l1: spec examples") {
  const RgbImage zero = constant(4, 3, 0.0);
  const RgbImage six = constant(4, 3, 0.6);
  const InlierMask full(4, 3, 1.0);
  CHECK(masked_l1(six, six, full).loss == 0.0);

  const MaskedLoss none = masked_l1(six, zero, InlierMask(4, 3, 0.0));
  CHECK(none.loss == 0.0);
  CHECK(none.empty_mask);
  for (const Rgb& g : none.grad.data) CHECK(g == Rgb{0, 0, 0});

  const MaskedLoss l = masked_l1(six, zero, full);
  CHECK(l.loss == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_FALSE(l.empty_mask);
  for (const Rgb& g : l.grad.data) {
    for (double c : g) CHECK(c == doctest::Approx(1.0 / 36.0).epsilon(1e-15));
  }
  for (double r : l.residual.data) CHECK(r == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("masked_l1: normalised by the inlier count") {
  RgbImage a = constant(2, 1, 0.0), b = constant(2, 1, 0.0);
  b[0] = {0.3, 0.6, 0.9};
  b[1] = {1.0, 1.0, 1.0};
  InlierMask m(2, 1, 0.0);
  m[0] = 1.0;
  const MaskedLoss l = masked_l1(a, b, m);
  CHECK(l.loss == doctest::Approx(0.6));
  CHECK(l.grad[0][0] == doctest::Approx(-1.0 / 3.0));
  CHECK(l.grad[1][0] == 0.0);
  CHECK_THROWS_AS((void)masked_l1(a, constant(3, 1, 0.0), m), std::invalid_argument);
}

TEST_CASE("masked_loss: L2 kernel value and gradient") {
  const RgbImage a = constant(3, 3, 0.5), b = constant(3, 3, 0.1);
  const MaskedLoss l = masked_loss(a, b, InlierMask(3, 3, 1.0), {kernels::KernelKind::kL2, 1.0});
  CHECK(l.loss == doctest::Approx(0.5 * 0.16));
  CHECK(l.grad[4][1] == doctest::Approx(0.4 / 27.0));
}

TEST_CASE("psnr: cap and closed form") {
  const RgbImage a = constant(5, 5, 0.5);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(psnr(a, constant(5, 5, 0.6)) == doctest::Approx(20.0));
  CHECK(psnr(constant(5, 5, 0.0), constant(5, 5, 1.0)) == doctest::Approx(0.0));
}

TEST_CASE("mask_iou: set arithmetic") {
  ScalarImage gt(4, 1, 0.0);
  gt[0] = gt[1] = 1.0;
  InlierMask pred(4, 1, 1.0);
  pred[0] = pred[1] = 0.0;
  CHECK(mask_iou(pred, gt) == 1.0);
  // Half-overlapping equal areas: {1, 2} vs {0, 1}.
  pred = InlierMask(4, 1, 1.0);
  pred[1] = pred[2] = 0.0;
  CHECK(mask_iou(pred, gt) == doctest::Approx(1.0 / 3.0));
  CHECK(mask_iou(InlierMask(4, 1, 1.0), ScalarImage(4, 1, 0.0)) == 1.0);
  CHECK(mask_iou(InlierMask(4, 1, 1.0), gt) == 0.0);
}

TEST_CASE("TrainConfig: validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.ubp.start = 10;
  c.ubp.stop = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.mask.tau = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("train: every mode runs, logs on schedule and is deterministic") {
  const SceneDataset data = tiny_scene("medium");
  for (MaskMode mode : {MaskMode::kNone, MaskMode::kTrim, MaskMode::kRobustFilter, MaskMode::kSlsAgg,
                        MaskMode::kSlsMlp}) {
    CAPTURE(mask_mode_name(mode));
    const TrainConfig cfg = tiny_config(mode);
    const TrainResult a = train(data, cfg);
    const TrainResult b = train(data, cfg);
    REQUIRE(a.log.rows.size() == 5);
    CHECK(a.log.rows == b.log.rows);
    CHECK(a.state.model.splats == b.state.model.splats);
    for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
      CHECK(a.log.rows[i].step == static_cast<int>(i) * cfg.eval_every);
      CHECK(std::isfinite(a.log.rows[i].psnr));
      CHECK(a.log.rows[i].iou >= 0.0);
      CHECK(a.log.rows[i].iou <= 1.0);
    }
    CHECK(a.log.rows.front().alpha == 1.0);
  }
}

TEST_CASE("train: fitting improves PSNR from the initialisation") {
  const SceneDataset data = tiny_scene("clean");
  TrainConfig cfg = tiny_config(MaskMode::kNone);
  cfg.steps = 200;
  cfg.eval_every = 200;
  const TrainResult r = train(data, cfg);
  CHECK(r.log.rows.back().psnr > r.log.rows.front().psnr + 3.0);
}

TEST_CASE("train: a final row is logged when steps is not a multiple of eval_every") {
  const SceneDataset data = tiny_scene("easy");
  TrainConfig cfg = tiny_config(MaskMode::kRobustFilter);
  cfg.steps = 25;
  const TrainResult r = train(data, cfg);
  REQUIRE(r.log.rows.size() == 4);
  CHECK(r.log.rows.back().step == 25);
}

TEST_CASE("train: evaluate reproduces the last row and ignores the thread count") {
  const SceneDataset data = tiny_scene("medium");
  const TrainConfig cfg = tiny_config(MaskMode::kSlsAgg);
  const TrainResult r = train(data, cfg);
  const TrainContext ctx = make_context(data, cfg);
  const EvalRecord e1 = evaluate(r.state, ctx, cfg);
  CHECK(e1.row == r.log.rows.back());
  ::setenv("SLS_THREADS", "1", 1);
  const EvalRecord e2 = evaluate(r.state, ctx, cfg);
  ::setenv("SLS_THREADS", "3", 1);
  const EvalRecord e3 = evaluate(r.state, ctx, cfg);
  ::unsetenv("SLS_THREADS");
  CHECK(e2.row == e1.row);
  CHECK(e3.row == e1.row);
  CHECK(e3.view_psnr == e1.view_psnr);
}

TEST_CASE("train: UBP prunes inside its window only") {
  const SceneDataset data = tiny_scene("clean");
  TrainConfig cfg = tiny_config(MaskMode::kNone);
  cfg.steps = 60;
  cfg.ubp = {true, 10, 30, 10, 1e30};
  const TrainResult r = train(data, cfg);
  // Every window prunes everything but the single best splat.
  CHECK(r.log.rows[1].splats == cfg.splats);
  CHECK(r.log.rows[2].splats == 1);
  CHECK(r.state.model.splats.size() == 1);

  cfg.ubp.kappa = 0.0;
  CHECK(train(data, cfg).state.model.splats.size() == static_cast<std::size_t>(cfg.splats));
}

TEST_CASE("train: a non-finite target aborts with NumericalError") {
  SceneDataset data = tiny_scene("clean");
  for (SceneView& v : data.views) v.image[5][1] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg = tiny_config(MaskMode::kNone);
  CHECK_THROWS_AS((void)train(data, cfg), NumericalError);
}

TEST_CASE("train: GLO starts at identity appearance") {
  const SceneDataset data = tiny_scene("clean");
  TrainConfig cfg = tiny_config(MaskMode::kNone);
  cfg.glo.enabled = true;
  const TrainState st = init_state(data, cfg);
  const TrainContext ctx = make_context(data, cfg);
  const EvalRecord rec = evaluate(st, ctx, cfg);
  CHECK(render(st.model, 0, 24, 24) == render(st.model, -1, 24, 24));
  CHECK(std::isfinite(rec.psnr_identity));
}
