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

// Internal declarations of the per-backend kernel implementations.

#pragma once

#include <cstddef>

#include "sls/simd.hpp"

namespace sls::simd {

namespace scalar {
void composite_forward(const SplatRow& s, std::size_t n, double* trans,
                       double* acc_r, double* acc_g, double* acc_b,
                       double* gauss_out, double* trans_out);
void composite_backward(const SplatRow& s, std::size_t n, const double* gauss,
                        const double* trans, const double* grad_r,
                        const double* grad_g, const double* grad_b,
                        double* behind_r, double* behind_g, double* behind_b,
                        RowGradSums& sums, double* const* jac);
void axpy(std::size_t n, double a, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
void exp(std::size_t n, const double* x, double* out);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
}  // namespace scalar

namespace avx2 {
// False when this translation unit was compiled without AVX2 codegen.
bool compiled();
void composite_forward(const SplatRow& s, std::size_t n, double* trans,
                       double* acc_r, double* acc_g, double* acc_b,
                       double* gauss_out, double* trans_out);
void composite_backward(const SplatRow& s, std::size_t n, const double* gauss,
                        const double* trans, const double* grad_r,
                        const double* grad_g, const double* grad_b,
                        double* behind_r, double* behind_g, double* behind_b,
                        RowGradSums& sums, double* const* jac);
void axpy(std::size_t n, double a, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
void exp(std::size_t n, const double* x, double* out);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
}  // namespace avx2

}  // namespace sls::simd
