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

#include "sls/smallnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sls/simd.hpp"

namespace sls {

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kSigmoid:
      return sigmoid(z);
    case Activation::kIdentity:
      return z;
  }
  return z;
}

double activate_grad(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

DenseNet::DenseNet(std::vector<int> dims, std::vector<Activation> acts,
                   bool lipschitz_normalize)
    : normalize_(lipschitz_normalize) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1) {
    throw std::invalid_argument("DenseNet: need dims.size() == acts.size() + 1 >= 2");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] < 1 || dims[l + 1] < 1) throw std::invalid_argument("DenseNet: layer widths must be >= 1");
    layers_.push_back({dims[l], dims[l + 1], acts[l], offset});
    offset += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1] + 1;
  }
  params_.assign(offset, 0.0);
}

void DenseNet::init_random(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
    double* w = weight(l);
    double max_row = 0.0;
    for (int j = 0; j < L.out; ++j) {
      double row = 0.0;
      for (int k = 0; k < L.in; ++k) {
        w[j * L.in + k] = rng.uniform(-bound, bound);
        row += std::abs(w[j * L.in + k]);
      }
      max_row = std::max(max_row, row);
    }
    std::fill(bias(l), bias(l) + L.out, 0.0);
    // softplus(c) = 1.1 * max_row: inactive at init, but away from the kink.
    const double target = 1.1 * std::max(max_row, 1e-6);
    lipschitz_c(l) = target > 30.0 ? target : std::log(std::expm1(target));
  }
}

void DenseNet::zero_last_layer() {
  const std::size_t l = layers_.size() - 1;
  const Layer& L = layers_[l];
  std::fill(weight(l), weight(l) + static_cast<std::size_t>(L.in) * L.out + L.out, 0.0);
}

void DenseNet::normalized_weights(std::size_t l, std::vector<double>& w,
                                  std::vector<double>& scales) const {
  const Layer& L = layers_[l];
  const double* raw = params_.data() + L.offset;
  w.assign(raw, raw + static_cast<std::size_t>(L.in) * L.out);
  scales.assign(L.out, 1.0);
  if (!normalize_) return;
  const double bound = softplus(lipschitz_c(l));
  for (int j = 0; j < L.out; ++j) {
    double row = 0.0;
    for (int k = 0; k < L.in; ++k) row += std::abs(raw[j * L.in + k]);
    if (row > bound) {
      scales[j] = bound / row;
      for (int k = 0; k < L.in; ++k) w[j * L.in + k] *= scales[j];
    }
  }
}

std::vector<double> DenseNet::forward_batch(std::span<const double> x, std::size_t n,
                                            Cache* cache) const {
  if (layers_.empty()) throw std::logic_error("DenseNet: empty network");
  if (n == 0 || x.size() != static_cast<std::size_t>(input_dim()) * n) {
    throw std::invalid_argument("DenseNet::forward: input size does not match input_dim");
  }
  const auto& k = simd::kernels();
  std::vector<double> act(x.begin(), x.end());
  std::vector<double> w, scales;
  if (cache != nullptr) {
    cache->batch = n;
    cache->inputs.assign(layers_.size(), {});
    cache->preact.assign(layers_.size(), {});
    cache->weights.assign(layers_.size(), {});
    cache->scales.assign(layers_.size(), {});
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    normalized_weights(l, w, scales);
    const double* b = params_.data() + L.offset + static_cast<std::size_t>(L.in) * L.out;
    std::vector<double> z(static_cast<std::size_t>(L.out) * n);
    for (int j = 0; j < L.out; ++j) {
      std::fill_n(z.data() + static_cast<std::size_t>(j) * n, n, b[j]);
    }
    k.gemm_nn(L.out, n, L.in, w.data(), L.in, act.data(), n, z.data(), n);
    std::vector<double> next(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) next[i] = activate(L.act, z[i]);
    if (cache != nullptr) {
      cache->inputs[l] = std::move(act);
      cache->preact[l] = std::move(z);
      cache->weights[l] = w;
      cache->scales[l] = scales;
    }
    act = std::move(next);
  }
  return act;
}

std::vector<double> DenseNet::forward(std::span<const double> x) const {
  return forward_batch(x, 1, nullptr);
}

std::vector<double> DenseNet::forward(std::span<const double> x, Cache& cache) const {
  return forward_batch(x, 1, &cache);
}

void DenseNet::backward(const Cache& cache, std::span<const double> grad_out,
                        std::span<double> grad_params, std::vector<double>* grad_in) const {
  if (!cache.valid() || cache.inputs.size() != layers_.size()) {
    throw std::logic_error("DenseNet::backward: no forward cache");
  }
  const std::size_t n = cache.batch;
  if (grad_out.size() != static_cast<std::size_t>(output_dim()) * n) {
    throw std::invalid_argument("DenseNet::backward: grad_out size mismatch");
  }
  if (grad_params.size() != params_.size()) {
    throw std::invalid_argument("DenseNet::backward: grad_params size mismatch");
  }
  const auto& k = simd::kernels();
  std::vector<double> upstream(grad_out.begin(), grad_out.end());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    const std::vector<double>& z = cache.preact[l];
    const std::vector<double>& a = cache.inputs[l];
    const std::vector<double>& w = cache.weights[l];
    const std::vector<double>& scales = cache.scales[l];

    std::vector<double> dz(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) dz[i] = upstream[i] * activate_grad(L.act, z[i]);

    double* gw = grad_params.data() + L.offset;
    double* gb = gw + static_cast<std::size_t>(L.in) * L.out;
    double* gc = gb + L.out;
    const double* raw = params_.data() + L.offset;
    const double bound = normalize_ ? softplus(lipschitz_c(l)) : 0.0;
    const double dbound = normalize_ ? sigmoid(lipschitz_c(l)) : 0.0;

    // dL/dW_eff.
    std::vector<double> g_all(static_cast<std::size_t>(L.out) * L.in, 0.0);
    k.gemm_nt(L.out, L.in, n, dz.data(), n, a.data(), n, g_all.data(), L.in);
    for (int j = 0; j < L.out; ++j) {
      const double* dzj = dz.data() + static_cast<std::size_t>(j) * n;
      double sb = 0.0;
      for (std::size_t i = 0; i < n; ++i) sb += dzj[i];
      gb[j] += sb;
      const double* g_eff = g_all.data() + static_cast<std::size_t>(j) * L.in;
      const double* wj = raw + static_cast<std::size_t>(j) * L.in;
      double* gwj = gw + static_cast<std::size_t>(j) * L.in;
      if (scales[j] < 1.0) {
        double row = 0.0;
        double gdotw = 0.0;
        for (int i = 0; i < L.in; ++i) {
          row += std::abs(wj[i]);
          gdotw += g_eff[i] * wj[i];
        }
        const double coef = bound / (row * row);
        for (int i = 0; i < L.in; ++i) {
          const double sgn = wj[i] > 0.0 ? 1.0 : (wj[i] < 0.0 ? -1.0 : 0.0);
          gwj[i] += scales[j] * g_eff[i] - coef * sgn * gdotw;
        }
        *gc += gdotw * dbound / row;
      } else {
        for (int i = 0; i < L.in; ++i) gwj[i] += g_eff[i];
      }
    }

    if (l > 0 || grad_in != nullptr) {
      std::vector<double> wt(static_cast<std::size_t>(L.in) * L.out);
      for (int j = 0; j < L.out; ++j) {
        for (int i = 0; i < L.in; ++i) {
          wt[static_cast<std::size_t>(i) * L.out + j] = w[static_cast<std::size_t>(j) * L.in + i];
        }
      }
      std::vector<double> down(static_cast<std::size_t>(L.in) * n, 0.0);
      k.gemm_nn(L.in, n, L.out, wt.data(), L.out, dz.data(), n, down.data(), n);
      upstream = std::move(down);
    }
  }
  if (grad_in != nullptr) *grad_in = std::move(upstream);
}

double DenseNet::lipschitz_penalty() const {
  double p = 1.0;
  for (std::size_t l = 0; l < layers_.size(); ++l) p *= softplus(lipschitz_c(l));
  return p;
}

void DenseNet::add_lipschitz_penalty_grad(double scale, std::span<double> grad_params) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    double others = 1.0;
    for (std::size_t m = 0; m < layers_.size(); ++m) {
      if (m != l) others *= softplus(lipschitz_c(m));
    }
    const Layer& L = layers_[l];
    grad_params[L.offset + static_cast<std::size_t>(L.in) * L.out + L.out] +=
        scale * sigmoid(lipschitz_c(l)) * others;
  }
}

bool DenseNet::operator==(const DenseNet& o) const {
  if (normalize_ != o.normalize_ || layers_.size() != o.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].in != o.layers_[l].in || layers_[l].out != o.layers_[l].out ||
        layers_[l].act != o.layers_[l].act) {
      return false;
    }
  }
  return params_ == o.params_;
}

double grad_check(const DenseNet& net, std::span<const double> x, double step) {
  const std::size_t n_out = static_cast<std::size_t>(net.output_dim());
  std::vector<double> contraction(n_out);
  Rng rng(0x5eed);
  for (double& r : contraction) r = rng.uniform(0.5, 1.5);

  auto objective = [&](const DenseNet& m, std::span<const double> in) {
    const std::vector<double> out = m.forward(in);
    double s = 0.0;
    for (std::size_t i = 0; i < n_out; ++i) s += contraction[i] * out[i];
    return s;
  };

  DenseNet::Cache cache;
  (void)net.forward(x, cache);
  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<double> grad_in;
  net.backward(cache, contraction, grad, &grad_in);

  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
  };

  double worst = 0.0;
  DenseNet probe = net;
  for (std::size_t p = 0; p < net.param_count(); ++p) {
    const double orig = probe.params()[p];
    probe.params()[p] = orig + step;
    const double up = objective(probe, x);
    probe.params()[p] = orig - step;
    const double down = objective(probe, x);
    probe.params()[p] = orig;
    worst = std::max(worst, rel(grad[p], (up - down) / (2.0 * step)));
  }
  std::vector<double> xp(x.begin(), x.end());
  for (std::size_t i = 0; i < xp.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + step;
    const double up = objective(net, xp);
    xp[i] = orig - step;
    const double down = objective(net, xp);
    xp[i] = orig;
    worst = std::max(worst, rel(grad_in[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

void adam_update(double& param, double grad, double& m, double& v, double lr,
                 const AdamConfig& cfg, std::int64_t step) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
  const double mhat = m / (1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const double vhat = v / (1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  param -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("Adam::step: size mismatch");
  }
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(params[i], grads[i], m_[i], v_[i], cfg_.lr, cfg_, t_);
  }
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity") return Activation::kIdentity;
  throw DataError("unknown activation '" + s + "'");
}

}  // namespace sls
