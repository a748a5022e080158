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

#include "sls/semantic_mask.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace sls {

void SlsConfig::validate() const {
  if (clusters < 1) throw ConfigError("sls.clusters must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("sls.lambda must be >= 0");
  if (pe_degree < 0) throw ConfigError("sls.pe_degree must be >= 0");
  if (hidden.empty()) throw ConfigError("sls.hidden needs at least one layer");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("sls.hidden widths must be >= 1");
  }
  if (!(lr > 0.0)) throw ConfigError("sls.lr must be > 0");
  if (train_pixels < 0) throw ConfigError("sls.train_pixels must be >= 0");
  if (!(tau_upper > 0.0 && tau_upper < 1.0 && tau_lower > 0.0 && tau_lower < 1.0)) {
    throw ConfigError("sls.tau_upper and sls.tau_lower must lie in (0, 1)");
  }
}

namespace {

struct Cluster {
  double count = 0.0;
  std::vector<double> sum;
  std::vector<int> neighbors;  // sorted, unique
  int version = 0;
  bool alive = true;
};

double ward_cost(const Cluster& a, const Cluster& b) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.sum.size(); ++k) {
    const double diff = a.sum[k] / a.count - b.sum[k] / b.count;
    d2 += diff * diff;
  }
  return a.count * b.count / (a.count + b.count) * d2;
}

struct Candidate {
  double cost;
  int a, b;  // a < b
  int version_a, version_b;
  bool operator>(const Candidate& o) const {
    return std::tie(cost, a, b) > std::tie(o.cost, o.a, o.b);
  }
};

}  // namespace

ClusterMap agglomerate(const FeatureMap& features, int target_clusters) {
  const int w = features.width;
  const int h = features.height;
  const int n = w * h;
  if (target_clusters < 1 || target_clusters > n) {
    throw std::invalid_argument("agglomerate: target_clusters must lie in [1, pixels]");
  }
  const int c = features.channels;
  std::vector<Cluster> cl(static_cast<std::size_t>(n));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      Cluster& k = cl[i];
      k.count = 1.0;
      k.sum.assign(features.pixel(i), features.pixel(i) + c);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if ((dx == 0 && dy == 0) || xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          k.neighbors.push_back(yy * w + xx);
        }
      }
      std::sort(k.neighbors.begin(), k.neighbors.end());
    }
  }

  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
  auto push = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    heap.push({ward_cost(cl[a], cl[b]), a, b, cl[a].version, cl[b].version});
  };
  for (int i = 0; i < n; ++i) {
    for (int j : cl[i].neighbors) {
      if (j > i) push(i, j);
    }
  }

  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parent[i] = i;
  int alive = n;
  std::vector<int> merged;
  while (alive > target_clusters && !heap.empty()) {
    const Candidate top = heap.top();
    heap.pop();
    Cluster& a = cl[top.a];
    Cluster& b = cl[top.b];
    if (!a.alive || !b.alive || a.version != top.version_a || b.version != top.version_b) {
      continue;
    }
    // b joins a.
    a.count += b.count;
    for (int k = 0; k < c; ++k) a.sum[k] += b.sum[k];
    merged.clear();
    std::set_union(a.neighbors.begin(), a.neighbors.end(), b.neighbors.begin(),
                   b.neighbors.end(), std::back_inserter(merged));
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [&](int v) { return v == top.a || v == top.b; }),
                 merged.end());
    a.neighbors = merged;
    ++a.version;
    b.alive = false;
    b.neighbors.clear();
    b.sum.clear();
    parent[top.b] = top.a;
    for (int v : a.neighbors) {
      auto& nb = cl[v].neighbors;
      auto it = std::lower_bound(nb.begin(), nb.end(), top.b);
      if (it != nb.end() && *it == top.b) nb.erase(it);
      it = std::lower_bound(nb.begin(), nb.end(), top.a);
      if (it == nb.end() || *it != top.a) nb.insert(it, top.a);
      push(top.a, v);
    }
    --alive;
  }

  auto find = [&](int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  ClusterMap out(w, h, -1);
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (label[r] < 0) label[r] = next++;
    out[i] = label[r];
  }
  return out;
}

InlierMask cluster_vote(const ClusterMap& clusters, const InlierMask& pixel_mask) {
  if (!clusters.same_shape(pixel_mask)) {
    throw std::invalid_argument("cluster_vote: cluster map and mask differ in size");
  }
  int count = 0;
  for (int id : clusters.data) {
    if (id < 0) throw std::invalid_argument("cluster_vote: negative cluster id");
    count = std::max(count, id + 1);
  }
  std::vector<double> num(static_cast<std::size_t>(count), 0.0);
  std::vector<double> den(static_cast<std::size_t>(count), 0.0);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    num[clusters[i]] += pixel_mask[i];
    den[clusters[i]] += 1.0;
  }
  InlierMask out(clusters.width, clusters.height, 0.0);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const int id = clusters[i];
    out[i] = num[id] > 0.5 * den[id] ? 1.0 : 0.0;
  }
  return out;
}

HingeLabels make_labels(const ScalarImage& residuals, const ResidualHistogram& hist,
                        const MaskConfig& mask_cfg, const SlsConfig& cfg) {
  HingeLabels l;
  l.upper = robust_filter(residuals, hist, mask_cfg, cfg.tau_upper);
  l.lower = robust_filter(residuals, hist, mask_cfg, cfg.tau_lower);
  for (std::size_t i = 0; i < l.lower.size(); ++i) l.lower[i] = std::min(l.lower[i], l.upper[i]);
  return l;
}

DenseNet make_classifier(int input_dim, const SlsConfig& cfg, std::uint64_t seed) {
  std::vector<int> dims{input_dim};
  std::vector<Activation> acts;
  for (int hdim : cfg.hidden) {
    dims.push_back(hdim);
    acts.push_back(Activation::kRelu);
  }
  dims.push_back(1);
  acts.push_back(Activation::kSigmoid);
  DenseNet net(dims, acts, true);
  net.init_random(seed);
  return net;
}

std::vector<double> gather_features(const FeatureMap& features,
                                    const std::vector<std::size_t>* pixels) {
  const std::size_t n = pixels != nullptr ? pixels->size() : features.pixels();
  const int c = features.channels;
  std::vector<double> out(static_cast<std::size_t>(c) * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* f = features.pixel(pixels != nullptr ? (*pixels)[i] : i);
    for (int k = 0; k < c; ++k) out[static_cast<std::size_t>(k) * n + i] = f[k];
  }
  return out;
}

namespace {

void check_input(const DenseNet& net, const FeatureMap& f) {
  if (net.input_dim() != f.channels || net.output_dim() != 1) {
    throw std::invalid_argument("classifier input size does not match the feature channels");
  }
}

std::size_t pixel_at(const std::vector<std::size_t>* pixels, std::size_t i) {
  return pixels != nullptr ? (*pixels)[i] : i;
}

}  // namespace

ScalarImage mlp_probabilities(const DenseNet& classifier, const FeatureMap& features) {
  check_input(classifier, features);
  ScalarImage out(features.width, features.height);
  out.data = classifier.forward_batch(gather_features(features, nullptr), features.pixels(),
                                      nullptr);
  return out;
}

InlierMask mlp_mask(const DenseNet& classifier, const FeatureMap& features) {
  InlierMask m = mlp_probabilities(classifier, features);
  for (double& v : m.data) v = v >= 0.5 ? 1.0 : 0.0;
  return m;
}

double hinge_loss(const DenseNet& classifier, const FeatureMap& features,
                  const HingeLabels& labels, double lambda,
                  const std::vector<std::size_t>* pixels) {
  check_input(classifier, features);
  const std::size_t n = pixels != nullptr ? pixels->size() : features.pixels();
  if (n == 0) return lambda * classifier.lipschitz_penalty();
  const std::vector<double> h =
      classifier.forward_batch(gather_features(features, pixels), n, nullptr);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = pixel_at(pixels, i);
    sum += std::max(labels.upper[p] - h[i], 0.0) + std::max(h[i] - labels.lower[p], 0.0);
  }
  return sum / static_cast<double>(n) + lambda * classifier.lipschitz_penalty();
}

std::vector<double> hinge_gradient(const DenseNet& classifier, const FeatureMap& features,
                                   const HingeLabels& labels,
                                   const std::vector<std::size_t>* pixels) {
  check_input(classifier, features);
  std::vector<double> grad(classifier.param_count(), 0.0);
  const std::size_t n = pixels != nullptr ? pixels->size() : features.pixels();
  if (n == 0) return grad;
  DenseNet::Cache cache;
  const std::vector<double> h =
      classifier.forward_batch(gather_features(features, pixels), n, &cache);
  std::vector<double> g(n);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = pixel_at(pixels, i);
    double d = 0.0;
    if (labels.upper[p] > h[i]) d -= 1.0;
    if (h[i] > labels.lower[p]) d += 1.0;
    g[i] = d * inv;
  }
  classifier.backward(cache, g, grad, nullptr);
  return grad;
}

double mlp_step(DenseNet& classifier, Adam& optimizer, const FeatureMap& features,
                const HingeLabels& labels, double lambda,
                const std::vector<std::size_t>* pixels) {
  if (!labels.upper.same_shape(features.width, features.height) ||
      !labels.lower.same_shape(features.width, features.height)) {
    throw std::invalid_argument("mlp_step: label size mismatch");
  }
  for (std::size_t i = 0; i < labels.lower.size(); ++i) {
    if (labels.lower[i] > labels.upper[i]) {
      throw std::invalid_argument("mlp_step: strict labels must be a subset of permissive labels");
    }
  }
  std::vector<double> grad = hinge_gradient(classifier, features, labels, pixels);
  classifier.add_lipschitz_penalty_grad(lambda, grad);
  optimizer.step(classifier.params(), grad);
  return hinge_loss(classifier, features, labels, lambda, pixels);
}

}  // namespace sls
