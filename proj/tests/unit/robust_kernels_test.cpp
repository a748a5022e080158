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

#include "doctest.h"
#include "sls/common.hpp"
#include "sls/robust_kernels.hpp"

using namespace sls::kernels;

namespace {

const RobustKernel kAll[] = {
    {KernelKind::kL2, 1.0},
    {KernelKind::kL1, 1.0},
    {KernelKind::kCharbonnier, 1.0},
    {KernelKind::kCharbonnier, 0.3},
    {KernelKind::kGemanMcClure, 1.0},
    {KernelKind::kGemanMcClure, 0.25},
};

// Step 1e-5, shrunk below |eps| / 2 so the stencil never straddles the L1 kink.
double central_diff(const RobustKernel& k, double e) {
  const double h = std::min(1e-5, std::abs(e) / 2);
  return (kernel_value(k, e + h) - kernel_value(k, e - h)) / (2 * h);
}

}  // namespace

TEST_CASE("kernel values") {
  CHECK(kernel_value({KernelKind::kL2, 1.0}, 2.0) == doctest::Approx(2.0));
  CHECK(kernel_value({KernelKind::kL1, 1.0}, -3.0) == doctest::Approx(3.0));
  CHECK(kernel_value({KernelKind::kCharbonnier, 1.0}, 0.0) == 0.0);
  CHECK(kernel_value({KernelKind::kGemanMcClure, 2.0}, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("irls weights") {
  CHECK(irls_weight({KernelKind::kL2, 1.0}, 7.3) == 1.0);
  CHECK(irls_weight({KernelKind::kL1, 1.0}, 2.0) == doctest::Approx(0.5));
  CHECK(irls_weight({KernelKind::kL1, 1.0}, 0.0) == kL1WeightClamp);
  CHECK(irls_weight({KernelKind::kL1, 1.0}, 1e-9) == kL1WeightClamp);
  CHECK(irls_weight({KernelKind::kCharbonnier, 1.0}, 0.0) == doctest::Approx(1.0));
  CHECK(irls_weight({KernelKind::kGemanMcClure, 1.0}, 0.0) == doctest::Approx(1.0));

  // Limit at 0 from the finite-difference slope near 0.
  const RobustKernel ch{KernelKind::kCharbonnier, 1.0};
  const double e = 1e-3;
  CHECK(central_diff(ch, e) / e == doctest::Approx(irls_weight(ch, 0.0)).epsilon(1e-6));
}

TEST_CASE("weight times residual matches finite-difference slope") {
  for (const auto& k : kAll) {
    for (double e = 1e-6; e <= 10.0; e *= 1.37) {
      INFO("kernel " << kernel_kind_name(k.kind) << " c=" << k.scale_c << " eps=" << e);
      CHECK(std::abs(irls_weight(k, e) * e - central_diff(k, e)) < 1e-6);
      CHECK(kernel_derivative(k, e) == doctest::Approx(irls_weight(k, e) * e).epsilon(1e-12));
    }
  }
}

TEST_CASE("kernel shape properties") {
  for (const auto& k : kAll) {
    CHECK(kernel_value(k, 0.0) == 0.0);
    double prev_v = 0.0;
    double prev_w = irls_weight(k, 1e-6);
    for (double e = 1e-6; e <= 50.0; e *= 1.21) {
      CHECK(kernel_value(k, e) == kernel_value(k, -e));
      CHECK(kernel_value(k, e) >= prev_v);
      const double w = irls_weight(k, e);
      if (k.kind == KernelKind::kL2) {
        CHECK(w == 1.0);
      } else {
        CHECK(w <= prev_w);
      }
      prev_v = kernel_value(k, e);
      prev_w = w;
    }
  }
  CHECK(irls_weight({KernelKind::kGemanMcClure, 1.0}, 1e4) < 1e-15);
  // L1 and Charbonnier decay like 1/eps.
  CHECK(irls_weight({KernelKind::kL1, 1.0}, 1e4) * 1e4 == doctest::Approx(1.0));
  CHECK(irls_weight({KernelKind::kCharbonnier, 1.0}, 1e4) * 1e4 ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("invalid inputs") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& k : kAll) {
    CHECK_THROWS_AS(kernel_value(k, nan), std::domain_error);
    CHECK_THROWS_AS(irls_weight(k, inf), std::domain_error);
  }
  CHECK_THROWS_AS(kernel_value({KernelKind::kCharbonnier, 0.0}, 1.0), std::domain_error);
  CHECK_THROWS_AS(irls_weight({KernelKind::kGemanMcClure, -1.0}, 1.0), std::domain_error);
}

TEST_CASE("kernel names round-trip") {
  for (auto kind : {KernelKind::kL2, KernelKind::kL1, KernelKind::kCharbonnier,
                    KernelKind::kGemanMcClure}) {
    CHECK(parse_kernel_kind(kernel_kind_name(kind)) == kind);
  }
  CHECK(parse_kernel_kind("geman_mcclure") == KernelKind::kGemanMcClure);
  CHECK_THROWS_AS(parse_kernel_kind("huber"), sls::ConfigError);
}
