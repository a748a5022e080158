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

#include <span>
#include <vector>

namespace sls {

struct HistogramConfig {
  double bucket_width = 1e-3;
  double max_residual = 2.0;
  double discount = 0.99;
};

// Discounted histogram of residual magnitudes. Bucket b covers
// [b * width, (b + 1) * width); the last bucket collects everything at or
// above max_residual. Each update first scales every population by the
// discount, then adds one unit per new residual.
//
// Not synchronised: updates and queries must come from one thread at a time.
class ResidualHistogram {
 public:
  explicit ResidualHistogram(const HistogramConfig& cfg = {});

  // Throws std::domain_error on negative or non-finite residuals.
  void update(std::span<const double> residuals);

  // Generalized median rho with P(residual > rho) = tau, quantized to the
  // upper edge of a bucket. Scanning down from the top, returns the first
  // bucket whose cumulative population reaches the rank tau * (M - 1) + 1,
  // where M is the total population; for a single undiscounted update this
  // selects the bucket holding the exact order statistic used by
  // exact_quantile. Returns +inf when the rank falls in the overflow bucket.
  // Throws std::logic_error on an empty histogram.
  [[nodiscard]] double quantile(double tau) const;

  [[nodiscard]] double total() const;
  [[nodiscard]] bool empty() const { return total() <= 0.0; }
  [[nodiscard]] std::size_t bucket_count() const { return buckets_.size() - 1; }
  [[nodiscard]] const std::vector<double>& populations() const { return buckets_; }
  [[nodiscard]] double overflow() const { return buckets_.back(); }
  [[nodiscard]] const HistogramConfig& config() const { return cfg_; }
  // Index of the bucket that receives residual r (bucket_count() = overflow).
  [[nodiscard]] std::size_t bucket_of(double r) const;

  // Restores populations, e.g. from a checkpoint. Size must match.
  void set_populations(std::vector<double> pops);

 private:
  HistogramConfig cfg_;
  std::vector<double> buckets_;  // regular buckets followed by overflow
};

// Test oracle: sorts and returns values[floor((1 - tau) * (N - 1))].
double exact_quantile(std::vector<double> values, double tau);

}  // namespace sls
