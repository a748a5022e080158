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

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sls/common.hpp"
#include "sls/residual_stats.hpp"

using sls::HistogramConfig;
using sls::ResidualHistogram;
using sls::exact_quantile;

TEST_CASE("single-bucket stream") {
  ResidualHistogram h;
  std::vector<double> r(100, 0.0005);
  h.update(r);
  CHECK(h.populations()[0] == 100.0);
  for (std::size_t b = 1; b < h.populations().size(); ++b) CHECK(h.populations()[b] == 0.0);
  CHECK(h.quantile(0.5) == doctest::Approx(0.001));
}

TEST_CASE("discount is applied before adding") {
  ResidualHistogram h({1e-3, 2.0, 0.9});
  h.update(std::vector<double>(100, 0.0005));
  h.update(std::vector<double>(10, 0.0015));
  CHECK(h.populations()[0] == doctest::Approx(90.0));
  CHECK(h.populations()[1] == doctest::Approx(10.0));
}

TEST_CASE("bucket layout and overflow") {
  ResidualHistogram h;
  CHECK(h.bucket_count() == 2000);
  CHECK(h.populations().size() == 2001);
  CHECK(h.bucket_of(0.0) == 0);
  CHECK(h.bucket_of(0.0999) == 99);
  CHECK(h.bucket_of(2.0) == 2000);
  CHECK(h.bucket_of(17.0) == 2000);
  h.update(std::vector<double>{5.0, 5.0, 0.0});
  CHECK(h.overflow() == 2.0);
  CHECK(std::isinf(h.quantile(0.5)));
}

TEST_CASE("replayed stream matches a brute-force replay") {
  sls::Rng rng(7);
  const HistogramConfig cfg{1e-3, 2.0, 0.97};
  ResidualHistogram h(cfg);
  std::vector<double> ref(2001, 0.0);
  for (int step = 0; step < 40; ++step) {
    std::vector<double> r(257);
    for (double& v : r) v = 2.2 * rng.uniform();
    h.update(r);
    for (double& p : ref) p *= cfg.discount;
    for (double v : r) {
      const auto b = std::min<std::size_t>(static_cast<std::size_t>(std::floor(v / 1e-3)), 2000);
      ref[b] += 1.0;
    }
  }
  for (std::size_t b = 0; b < ref.size(); ++b) {
    CHECK(h.populations()[b] == doctest::Approx(ref[b]).epsilon(1e-12));
  }
}

TEST_CASE("quantile examples") {
  SUBCASE("uniform mass over buckets 0..999") {
    std::vector<double> r;
    for (int b = 0; b < 1000; ++b) r.push_back((b + 0.5) * 1e-3);
    ResidualHistogram h({1e-3, 2.0, 1.0});
    h.update(r);
    CHECK(std::abs(h.quantile(0.5) - 0.5) <= 1e-3 + 1e-12);
    CHECK(std::abs(h.quantile(0.5) - exact_quantile(r, 0.5)) <= 1e-3);
  }
  SUBCASE("two-point distribution") {
    std::vector<double> r(700, 0.1);
    r.insert(r.end(), 300, 1.0);
    ResidualHistogram h({1e-3, 2.0, 1.0});
    h.update(r);
    CHECK(std::abs(h.quantile(0.25) - 1.0) <= 1e-3 + 1e-12);
    CHECK(exact_quantile(r, 0.25) == 1.0);
  }
}

TEST_CASE("exact_quantile") {
  CHECK(exact_quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(exact_quantile({5}, 0.9) == 5.0);
  CHECK(exact_quantile({5, 1, 4, 2, 3}, 0.1) == 4.0);
  sls::Rng rng(3);
  std::vector<double> r(10000);
  for (double& v : r) v = rng.uniform();
  CHECK(std::abs(exact_quantile(r, 0.5) - 0.5) < 0.02);
  CHECK_THROWS_AS(exact_quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("single undiscounted update stays within one bucket of the sort oracle") {
  sls::Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(3000);
    std::vector<double> r(n);
    const double scale = rng.uniform(0.01, 1.9);
    for (double& v : r) v = scale * rng.uniform();
    ResidualHistogram h({1e-3, 2.0, 1.0});
    h.update(r);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 9; ++k) {
      const double tau = 0.1 * k;
      const double q = h.quantile(tau);
      CHECK(std::abs(q - exact_quantile(r, tau)) <= 1e-3 + 1e-12);
      CHECK(q <= prev);
      prev = q;
    }
  }
}

TEST_CASE("discounted histogram tracks a distribution shift") {
  const HistogramConfig cfg{1e-3, 2.0, 0.9};
  ResidualHistogram h(cfg);
  sls::Rng rng(5);
  auto batch = [&](double lo, double hi) {
    std::vector<double> r(4000);
    for (double& v : r) v = rng.uniform(lo, hi);
    return r;
  };
  for (int i = 0; i < 20; ++i) h.update(batch(0.0, 0.2));
  const int needed = static_cast<int>(std::ceil(std::log(0.01) / std::log(cfg.discount)));
  const std::vector<double> shifted = batch(0.6, 0.7);
  for (int i = 0; i < needed; ++i) h.update(shifted);
  for (double tau : {0.3, 0.5, 0.7}) {
    CHECK(std::abs(h.quantile(tau) - exact_quantile(shifted, tau)) <= 1e-3 + 1e-12);
  }
}

TEST_CASE("errors") {
  ResidualHistogram h;
  CHECK_THROWS_AS((void)h.quantile(0.5), std::logic_error);
  CHECK_THROWS_AS(h.update(std::vector<double>{-0.1}), std::domain_error);
  CHECK_THROWS_AS(h.update(std::vector<double>{std::nan("")}), std::domain_error);
  h.update(std::vector<double>{0.1});
  CHECK_THROWS_AS((void)h.quantile(0.0), std::domain_error);
  CHECK_THROWS_AS((void)h.quantile(1.0), std::domain_error);
  CHECK_THROWS(h.set_populations(std::vector<double>(3, 1.0)));
}
