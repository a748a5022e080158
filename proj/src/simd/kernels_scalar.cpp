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

#include <cmath>

#include "kernels_impl.hpp"
#include "sls/simd.hpp"

namespace sls::simd::scalar {

void composite_forward(const SplatRow& s, std::size_t n, double* trans,
                       double* acc_r, double* acc_g, double* acc_b,
                       double* gauss_out, double* trans_out) {
  const double dy = s.v - s.mean_y;
  const double cyy = s.conic_c * dy * dy;
  const double bxy = 2.0 * s.conic_b * dy;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = s.u0 + static_cast<double>(i) * s.du - s.mean_x;
    const double q = s.conic_a * dx * dx + bxy * dx + cyy;
    const double g = std::exp(-0.5 * q);
    const double alpha = s.opacity * g;
    const double t = trans[i];
    gauss_out[i] = g;
    trans_out[i] = t;
    const double w = alpha * t;
    acc_r[i] += s.color[0] * w;
    acc_g[i] += s.color[1] * w;
    acc_b[i] += s.color[2] * w;
    trans[i] = t * (1.0 - alpha);
  }
}

void composite_backward(const SplatRow& s, std::size_t n, const double* gauss,
                        const double* trans, const double* grad_r,
                        const double* grad_g, const double* grad_b,
                        double* behind_r, double* behind_g, double* behind_b,
                        RowGradSums& sums, double* const* jac) {
  const double dy = s.v - s.mean_y;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = s.u0 + static_cast<double>(i) * s.du - s.mean_x;
    const double g = gauss[i];
    const double t = trans[i];
    const double alpha = s.opacity * g;
    const double er = s.color[0] - behind_r[i];
    const double eg = s.color[1] - behind_g[i];
    const double eb = s.color[2] - behind_b[i];
    const double d_alpha = t * (grad_r[i] * er + grad_g[i] * eg + grad_b[i] * eb);
    const double at = alpha * t;
    sums.d_color[0] += grad_r[i] * at;
    sums.d_color[1] += grad_g[i] * at;
    sums.d_color[2] += grad_b[i] * at;
    sums.d_opacity += d_alpha * g;
    const double d_q = -0.5 * alpha * d_alpha;
    const double ax = s.conic_a * dx + s.conic_b * dy;
    const double ay = s.conic_b * dx + s.conic_c * dy;
    sums.d_conic_a += d_q * dx * dx;
    sums.d_conic_b += d_q * 2.0 * dx * dy;
    sums.d_conic_c += d_q * dy * dy;
    sums.d_mean_x += -2.0 * d_q * ax;
    sums.d_mean_y += -2.0 * d_q * ay;
    if (jac != nullptr) {
      const double kx = t * alpha * ax;
      const double ky = t * alpha * ay;
      jac[0][i] = kx * er;
      jac[1][i] = kx * eg;
      jac[2][i] = kx * eb;
      jac[3][i] = ky * er;
      jac[4][i] = ky * eg;
      jac[5][i] = ky * eb;
    }
    behind_r[i] = s.color[0] * alpha + (1.0 - alpha) * behind_r[i];
    behind_g[i] = s.color[1] * alpha + (1.0 - alpha) * behind_g[i];
    behind_b[i] = s.color[2] * alpha + (1.0 - alpha) * behind_b[i];
  }
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void exp(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * lda + p];
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += aip * b[p * ldb + j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += dot(k, a + i * lda, b + j * ldb);
  }
}

}  // namespace sls::simd::scalar
