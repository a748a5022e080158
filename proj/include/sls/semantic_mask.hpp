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
#include <vector>

#include "sls/common.hpp"
#include "sls/residual_stats.hpp"
#include "sls/robust_mask.hpp"
#include "sls/smallnet.hpp"

namespace sls {

struct SlsConfig {
  int clusters = 100;
  double lambda = 0.5;
  int pe_degree = 8;
  std::vector<int> hidden{64, 64};
  double lr = 1e-3;
  // Pixels sampled per classifier step; 0 uses every pixel.
  int train_pixels = 2048;
  double tau_upper = 0.5;  // permissive labels U
  double tau_lower = 0.9;  // strict labels L

  void validate() const;
};

// Greedy agglomerative clustering of pixels on the 8-connected grid graph.
// Starting from singletons, repeatedly merges the adjacent pair with the
// smallest Ward cost n_a n_b / (n_a + n_b) * |mean_a - mean_b|^2 until
// `target_clusters` remain. Ties go to the pair with the smaller ids. Ids in
// the result are numbered in raster order of first appearance.
// Throws std::invalid_argument unless 1 <= target_clusters <= pixels.
ClusterMap agglomerate(const FeatureMap& features, int target_clusters);

// Pixel p is an inlier iff the mean of `pixel_mask` over its cluster is
// strictly greater than 0.5.
InlierMask cluster_vote(const ClusterMap& clusters, const InlierMask& pixel_mask);

struct HingeLabels {
  InlierMask upper;  // U: permissive inlier set
  InlierMask lower;  // L: strict inlier set, L <= U pixelwise
};

// U and L are robust_filter masks at cfg.tau_upper and cfg.tau_lower; L is
// intersected with U.
HingeLabels make_labels(const ScalarImage& residuals, const ResidualHistogram& hist,
                        const MaskConfig& mask_cfg, const SlsConfig& cfg = {});

// input -> hidden... -> 1, relu hidden layers, sigmoid output, Lipschitz
// normalised.
DenseNet make_classifier(int input_dim, const SlsConfig& cfg, std::uint64_t seed);

// Feature-major copy of the selected pixels (all pixels when `pixels` is
// null), ready for DenseNet::forward_batch.
std::vector<double> gather_features(const FeatureMap& features,
                                    const std::vector<std::size_t>* pixels);

// Per-pixel inlier probability H(F).
ScalarImage mlp_probabilities(const DenseNet& classifier, const FeatureMap& features);
// H(F) binarised at 0.5 (ties are inliers).
InlierMask mlp_mask(const DenseNet& classifier, const FeatureMap& features);

// Mean hinge loss max(U - H, 0) + max(H - L, 0) over the selected pixels plus
// lambda * lipschitz_penalty().
double hinge_loss(const DenseNet& classifier, const FeatureMap& features,
                  const HingeLabels& labels, double lambda,
                  const std::vector<std::size_t>* pixels = nullptr);

// One optimiser step on hinge_loss; returns the loss after the step.
// Throws std::invalid_argument when L is not a subset of U.
double mlp_step(DenseNet& classifier, Adam& optimizer, const FeatureMap& features,
                const HingeLabels& labels, double lambda,
                const std::vector<std::size_t>* pixels = nullptr);

// Supervision-only parameter gradient of the mean hinge loss (no penalty).
std::vector<double> hinge_gradient(const DenseNet& classifier, const FeatureMap& features,
                                   const HingeLabels& labels,
                                   const std::vector<std::size_t>* pixels = nullptr);

}  // namespace sls
