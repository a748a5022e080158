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
#include <span>
#include <string>
#include <vector>

#include "sls/common.hpp"

namespace sls {

enum class Activation { kRelu, kSigmoid, kIdentity };

// Minimal dense feed-forward network with hand-written reverse mode.
//
// All parameters live in one flat vector; layer l occupies
//   W (out x in, row-major) | b (out) | c (1)
// where c is the trainable Lipschitz bound. With normalisation enabled, row j
// of W is scaled by min(1, softplus(c) / sum_k |W_jk|) before use, which
// bounds the layer's infinity-norm Lipschitz constant by softplus(c).
//
// Batched evaluation uses feature-major buffers: element (k, i) of a batch of
// n samples is at k * n + i.
class DenseNet {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    Activation act = Activation::kIdentity;
    std::size_t offset = 0;  // start of W in the flat parameter vector
  };

  // Per-call intermediate values needed by backward().
  struct Cache {
    std::size_t batch = 0;
    std::vector<std::vector<double>> inputs;   // per layer, in x batch
    std::vector<std::vector<double>> preact;   // per layer, out x batch
    std::vector<std::vector<double>> weights;  // per layer, normalised W
    std::vector<std::vector<double>> scales;   // per layer, row scale
    [[nodiscard]] bool valid() const { return batch > 0 && !inputs.empty(); }
  };

  DenseNet() = default;
  // dims = {input, hidden..., output}; acts has dims.size() - 1 entries.
  DenseNet(std::vector<int> dims, std::vector<Activation> acts,
           bool lipschitz_normalize);

  // Uniform fan-in initialisation; c is set so that normalisation is a no-op
  // on the initial weights.
  void init_random(std::uint64_t seed);
  // Zeroes W and b of the last layer.
  void zero_last_layer();

  [[nodiscard]] int input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  [[nodiscard]] int output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  [[nodiscard]] bool lipschitz_normalize() const { return normalize_; }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  [[nodiscard]] std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  [[nodiscard]] std::span<const double> params() const { return params_; }

  double* weight(std::size_t l) { return params_.data() + layers_[l].offset; }
  double* bias(std::size_t l) { return weight(l) + layers_[l].in * layers_[l].out; }
  double& lipschitz_c(std::size_t l) { return bias(l)[layers_[l].out]; }
  [[nodiscard]] double lipschitz_c(std::size_t l) const {
    const Layer& L = layers_[l];
    return params_[L.offset + static_cast<std::size_t>(L.in) * L.out + L.out];
  }

  // Single sample. Throws std::invalid_argument on dimension mismatch.
  [[nodiscard]] std::vector<double> forward(std::span<const double> x) const;
  [[nodiscard]] std::vector<double> forward(std::span<const double> x, Cache& cache) const;

  // Batched forward of n samples (feature-major); returns output_dim x n.
  [[nodiscard]] std::vector<double> forward_batch(std::span<const double> x, std::size_t n,
                                                  Cache* cache) const;

  // Accumulates parameter gradients of sum(grad_out * output) into
  // grad_params and, when grad_in is non-null, writes the input gradient.
  // Throws std::logic_error when the cache is empty.
  void backward(const Cache& cache, std::span<const double> grad_out,
                std::span<double> grad_params, std::vector<double>* grad_in) const;

  // prod_l softplus(c_l).
  [[nodiscard]] double lipschitz_penalty() const;
  // grad_params += scale * d(penalty)/d(params).
  void add_lipschitz_penalty_grad(double scale, std::span<double> grad_params) const;

  bool operator==(const DenseNet& o) const;

 private:
  void normalized_weights(std::size_t l, std::vector<double>& w,
                          std::vector<double>& scales) const;

  std::vector<Layer> layers_;
  std::vector<double> params_;
  bool normalize_ = false;
};

double softplus(double x);
double sigmoid(double x);

// Worst relative error between backward() and central finite differences
// over every parameter and input of the scalar sum(r * forward(x)), r a
// fixed pseudo-random contraction. Denominators are floored at 1e-3.
double grad_check(const DenseNet& net, std::span<const double> x, double step = 1e-4);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected adaptive-moment update of a single scalar; `step`
// counts from 1.
void adam_update(double& param, double grad, double& m, double& v, double lr,
                 const AdamConfig& cfg, std::int64_t step);

// Adaptive-moment optimiser over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grads);
  [[nodiscard]] std::int64_t steps() const { return t_; }
  [[nodiscard]] const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

std::string activation_name(Activation a);
Activation parse_activation(const std::string& s);

}  // namespace sls
