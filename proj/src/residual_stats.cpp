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

#include "sls/residual_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sls/common.hpp"

namespace sls {

ResidualHistogram::ResidualHistogram(const HistogramConfig& cfg) : cfg_(cfg) {
  if (!(cfg.bucket_width > 0.0) || !(cfg.max_residual > cfg.bucket_width)) {
    throw ConfigError("hist: need 0 < bucket_width < max_residual");
  }
  if (!(cfg.discount > 0.0 && cfg.discount <= 1.0)) {
    throw ConfigError("hist.discount must lie in (0, 1]");
  }
  // Guard against 2.0 / 0.001 landing a hair above an integer.
  const auto regular = static_cast<std::size_t>(
      std::ceil(cfg.max_residual / cfg.bucket_width - 1e-9));
  buckets_.assign(regular + 1, 0.0);
}

std::size_t ResidualHistogram::bucket_of(double r) const {
  const std::size_t regular = bucket_count();
  if (r >= cfg_.max_residual) return regular;
  const auto b = static_cast<std::size_t>(std::floor(r / cfg_.bucket_width));
  return std::min(b, regular - 1);
}

void ResidualHistogram::update(std::span<const double> residuals) {
  for (double r : residuals) {
    if (!std::isfinite(r)) throw std::domain_error("hist_update: non-finite residual");
    if (r < 0.0) throw std::domain_error("hist_update: negative residual");
  }
  if (cfg_.discount != 1.0) {
    for (double& p : buckets_) p *= cfg_.discount;
  }
  for (double r : residuals) buckets_[bucket_of(r)] += 1.0;
}

double ResidualHistogram::total() const {
  return std::accumulate(buckets_.begin(), buckets_.end(), 0.0);
}

double ResidualHistogram::quantile(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("hist_quantile: tau must lie in (0, 1)");
  const double mass = total();
  if (!(mass > 0.0)) throw std::logic_error("hist_quantile: empty histogram");
  double rank = mass >= 1.0 ? tau * (mass - 1.0) + 1.0 : tau * mass;
  // Tolerate rounding in tau * (mass - 1), e.g. tau = 0.1 * 3.
  rank -= 1e-9 * rank;

  double cumulative = buckets_.back();
  if (cumulative >= rank) return std::numeric_limits<double>::infinity();
  for (std::size_t b = bucket_count(); b-- > 0;) {
    cumulative += buckets_[b];
    if (cumulative >= rank) return static_cast<double>(b + 1) * cfg_.bucket_width;
  }
  return cfg_.bucket_width;
}

void ResidualHistogram::set_populations(std::vector<double> pops) {
  if (pops.size() != buckets_.size()) {
    throw DataError("histogram: population vector has wrong size");
  }
  for (double p : pops) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DataError("histogram: bad population");
  }
  buckets_ = std::move(pops);
}

double exact_quantile(std::vector<double> values, double tau) {
  if (values.empty()) throw std::invalid_argument("exact_quantile: empty list");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size() - 1);
  const auto idx = static_cast<std::size_t>(std::floor((1.0 - tau) * n + 1e-9 * std::max(n, 1.0)));
  return values[std::min(idx, values.size() - 1)];
}

}  // namespace sls
