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

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation and, where the CPU allows it, an AVX2/FMA variant picked at
// runtime. Both variants must agree to within floating-point reassociation;
// tests/unit/simd_equivalence_test.cpp pins that.
//
// Kernels take raw pointers on purpose: this header is included by the AVX2
// translation unit, which must not instantiate any inline library code.

#pragma once

#include <cstddef>

namespace sls::simd {

// One splat restricted to one pixel row. The conic (A, B, C) is the inverse
// covariance; the Mahalanobis form is A dx^2 + 2 B dx dy + C dy^2.
struct SplatRow {
  double conic_a, conic_b, conic_c;
  double mean_x, mean_y;
  double opacity;
  double color[3];
  double v;         // row coordinate (normalized)
  double u0;        // first pixel centre (normalized)
  double du;        // pixel pitch (normalized)
};

// Reduction targets of the backward row pass, in Mahalanobis-space terms.
struct RowGradSums {
  double d_color[3];
  double d_opacity;  // sum dL/dalpha * gaussian
  double d_conic_a, d_conic_b, d_conic_c;
  double d_mean_x, d_mean_y;
};

// Front-to-back compositing of one splat over n pixels. Reads and updates
// transmittance `trans` and the three accumulator planes; records the
// gaussian value and the incoming transmittance for the backward pass.
using CompositeForwardFn = void (*)(const SplatRow& s, std::size_t n,
                                    double* trans, double* acc_r, double* acc_g,
                                    double* acc_b, double* gauss_out,
                                    double* trans_out);

// Back-to-front reverse of the forward pass. `behind_*` hold the colour seen
// just behind the current splat, normalised by transmittance; they are
// updated in place to the colour seen just in front of it. `jac` is either
// null or six planes receiving dI_c/dmean_x (c = 0..2) then dI_c/dmean_y.
using CompositeBackwardFn = void (*)(const SplatRow& s, std::size_t n,
                                     const double* gauss, const double* trans,
                                     const double* grad_r, const double* grad_g,
                                     const double* grad_b, double* behind_r,
                                     double* behind_g, double* behind_b,
                                     RowGradSums& sums, double* const* jac);

// y += a * x
using AxpyFn = void (*)(std::size_t n, double a, const double* x, double* y);
// sum x[i] * y[i]
using DotFn = double (*)(std::size_t n, const double* x, const double* y);
// out[i] = exp(x[i])
using ExpFn = void (*)(std::size_t n, const double* x, double* out);
// Row-major C (m x n) += A (m x k) * B (k x n), with leading dimensions.
using GemmNNFn = void (*)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                          std::size_t lda, const double* b, std::size_t ldb, double* c,
                          std::size_t ldc);
// Row-major C (m x n) += A (m x k) * B^T, B stored as n x k.
using GemmNTFn = GemmNNFn;

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  const char* name;
  CompositeForwardFn composite_forward;
  CompositeBackwardFn composite_backward;
  AxpyFn axpy;
  DotFn dot;
  ExpFn exp;
  GemmNNFn gemm_nn;
  GemmNTFn gemm_nt;
};

const KernelTable& scalar_kernels();
// Null when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_kernels();

// Active table. Defaults to the best supported backend; the environment
// variable SLS_SIMD=scalar forces the reference kernels.
const KernelTable& kernels();
// Returns false when the requested backend is unavailable.
bool set_backend(Backend b);

}  // namespace sls::simd
