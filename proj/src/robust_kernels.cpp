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

#include "sls/robust_kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "sls/common.hpp"

namespace sls::kernels {
namespace {

void check_args(const RobustKernel& k, double eps) {
  if (!std::isfinite(eps)) throw std::domain_error("robust kernel: non-finite residual");
  if ((k.kind == KernelKind::kCharbonnier || k.kind == KernelKind::kGemanMcClure) &&
      !(k.scale_c > 0.0)) {
    throw std::domain_error("robust kernel: scale must be positive");
  }
}

}  // namespace

double kernel_value(const RobustKernel& k, double eps) {
  check_args(k, eps);
  const double e2 = eps * eps;
  switch (k.kind) {
    case KernelKind::kL2:
      return 0.5 * e2;
    case KernelKind::kL1:
      return std::abs(eps);
    case KernelKind::kCharbonnier: {
      const double c = k.scale_c;
      return std::sqrt(e2 + c * c) - c;
    }
    case KernelKind::kGemanMcClure:
      return 0.5 * e2 / (1.0 + e2 / (k.scale_c * k.scale_c));
  }
  return 0.0;
}

double irls_weight(const RobustKernel& k, double eps) {
  check_args(k, eps);
  const double e2 = eps * eps;
  switch (k.kind) {
    case KernelKind::kL2:
      return 1.0;
    case KernelKind::kL1: {
      const double a = std::abs(eps);
      return a < 1e-8 ? kL1WeightClamp : 1.0 / a;
    }
    case KernelKind::kCharbonnier:
      return 1.0 / std::sqrt(e2 + k.scale_c * k.scale_c);
    case KernelKind::kGemanMcClure: {
      const double d = 1.0 + e2 / (k.scale_c * k.scale_c);
      return 1.0 / (d * d);
    }
  }
  return 0.0;
}

double kernel_derivative(const RobustKernel& k, double eps) {
  if (k.kind == KernelKind::kL1) {
    check_args(k, eps);
    return eps > 0.0 ? 1.0 : (eps < 0.0 ? -1.0 : 0.0);
  }
  return irls_weight(k, eps) * eps;
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "l2") return KernelKind::kL2;
  if (name == "l1") return KernelKind::kL1;
  if (name == "charbonnier") return KernelKind::kCharbonnier;
  if (name == "geman_mcclure") return KernelKind::kGemanMcClure;
  throw ConfigError("unknown loss.kernel '" + std::string(name) +
                    "' (expected l2|l1|charbonnier|geman_mcclure)");
}

std::string kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::kL2:
      return "l2";
    case KernelKind::kL1:
      return "l1";
    case KernelKind::kCharbonnier:
      return "charbonnier";
    case KernelKind::kGemanMcClure:
      return "geman_mcclure";
  }
  return "l1";
}

}  // namespace sls::kernels
