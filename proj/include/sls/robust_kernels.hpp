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

#include <string>
#include <string_view>

namespace sls::kernels {

enum class KernelKind { kL2, kL1, kCharbonnier, kGemanMcClure };

// Robust penalty kappa(eps) together with its scale. Definitions:
//   L2            eps^2 / 2
//   L1            |eps|
//   Charbonnier   sqrt(eps^2 + c^2) - c
//   Geman-McClure (eps^2 / 2) / (1 + eps^2 / c^2)
struct RobustKernel {
  KernelKind kind = KernelKind::kL1;
  double scale_c = 1.0;
};

// L1 weights are clamped to this value below |eps| = 1e-8.
inline constexpr double kL1WeightClamp = 1e8;

double kernel_value(const RobustKernel& k, double eps);

// IRLS weight w(eps) = kappa'(eps) / eps, defined by its limit at 0.
double irls_weight(const RobustKernel& k, double eps);

// kappa'(eps); what the trainer back-propagates per pixel.
double kernel_derivative(const RobustKernel& k, double eps);

KernelKind parse_kernel_kind(std::string_view name);
std::string kernel_kind_name(KernelKind kind);

}  // namespace sls::kernels
