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

// AVX2/FMA variants. This file is the only one compiled with -mavx2 -mfma and
// is only entered after a runtime CPU check, so it must stay free of inline
// library code that could be merged into the portable build.

#include "kernels_impl.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <vector>

namespace sls::simd::avx2 {
namespace {

// Cephes-style exp: range reduction by ln 2 and a rational approximation on
// [-ln2/2, ln2/2]. Agrees with std::exp to about 1 ulp on [-700, 700].
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(700.0);
  const __m256d lo = _mm256_set1_pd(-700.0);
  x = _mm256_max_pd(_mm256_min_pd(x, hi), lo);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125E-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212E-6);
  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(fx, c1, x);
  x = _mm256_fnmadd_pd(fx, c2, x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(1.26177193074810590878E-4);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_set1_pd(3.00198505138664455042E-6);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  r = _mm256_fmadd_pd(r, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  __m256i n = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(fx));
  n = _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(r, _mm256_castsi256_pd(n));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d lane_offsets() { return _mm256_set_pd(3.0, 2.0, 1.0, 0.0); }

}  // namespace

bool compiled() { return true; }

void composite_forward(const SplatRow& s, std::size_t n, double* trans,
                       double* acc_r, double* acc_g, double* acc_b,
                       double* gauss_out, double* trans_out) {
  const double dy = s.v - s.mean_y;
  const __m256d ca = _mm256_set1_pd(s.conic_a);
  const __m256d bxy = _mm256_set1_pd(2.0 * s.conic_b * dy);
  const __m256d cyy = _mm256_set1_pd(s.conic_c * dy * dy);
  const __m256d op = _mm256_set1_pd(s.opacity);
  const __m256d cr = _mm256_set1_pd(s.color[0]);
  const __m256d cg = _mm256_set1_pd(s.color[1]);
  const __m256d cb = _mm256_set1_pd(s.color[2]);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  const __m256d du = _mm256_set1_pd(s.du);
  const __m256d u0 = _mm256_set1_pd(s.u0);
  const __m256d mx = _mm256_set1_pd(s.mean_x);
  const __m256d lanes = lane_offsets();

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d idx = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(i)), lanes);
    const __m256d dx = _mm256_sub_pd(_mm256_fmadd_pd(idx, du, u0), mx);
    __m256d q = _mm256_mul_pd(_mm256_mul_pd(ca, dx), dx);
    q = _mm256_add_pd(_mm256_fmadd_pd(bxy, dx, q), cyy);
    const __m256d g = exp_pd(_mm256_mul_pd(mhalf, q));
    const __m256d alpha = _mm256_mul_pd(op, g);
    const __m256d t = _mm256_loadu_pd(trans + i);
    _mm256_storeu_pd(gauss_out + i, g);
    _mm256_storeu_pd(trans_out + i, t);
    const __m256d w = _mm256_mul_pd(alpha, t);
    _mm256_storeu_pd(acc_r + i, _mm256_fmadd_pd(cr, w, _mm256_loadu_pd(acc_r + i)));
    _mm256_storeu_pd(acc_g + i, _mm256_fmadd_pd(cg, w, _mm256_loadu_pd(acc_g + i)));
    _mm256_storeu_pd(acc_b + i, _mm256_fmadd_pd(cb, w, _mm256_loadu_pd(acc_b + i)));
    _mm256_storeu_pd(trans + i, _mm256_mul_pd(t, _mm256_sub_pd(one, alpha)));
  }
  if (i < n) {
    SplatRow tail = s;
    tail.u0 = s.u0 + static_cast<double>(i) * s.du;
    scalar::composite_forward(tail, n - i, trans + i, acc_r + i, acc_g + i,
                              acc_b + i, gauss_out + i, trans_out + i);
  }
}

void composite_backward(const SplatRow& s, std::size_t n, const double* gauss,
                        const double* trans, const double* grad_r,
                        const double* grad_g, const double* grad_b,
                        double* behind_r, double* behind_g, double* behind_b,
                        RowGradSums& sums, double* const* jac) {
  const double dy_s = s.v - s.mean_y;
  const __m256d dy = _mm256_set1_pd(dy_s);
  const __m256d ca = _mm256_set1_pd(s.conic_a);
  const __m256d cbv = _mm256_set1_pd(s.conic_b);
  const __m256d ccv = _mm256_set1_pd(s.conic_c);
  const __m256d op = _mm256_set1_pd(s.opacity);
  const __m256d cr = _mm256_set1_pd(s.color[0]);
  const __m256d cg = _mm256_set1_pd(s.color[1]);
  const __m256d cb = _mm256_set1_pd(s.color[2]);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d mtwo = _mm256_set1_pd(-2.0);
  const __m256d du = _mm256_set1_pd(s.du);
  const __m256d u0 = _mm256_set1_pd(s.u0);
  const __m256d mx = _mm256_set1_pd(s.mean_x);
  const __m256d lanes = lane_offsets();

  __m256d s_cr = _mm256_setzero_pd(), s_cg = _mm256_setzero_pd(),
          s_cb = _mm256_setzero_pd(), s_op = _mm256_setzero_pd(),
          s_a = _mm256_setzero_pd(), s_b = _mm256_setzero_pd(),
          s_c = _mm256_setzero_pd(), s_mx = _mm256_setzero_pd(),
          s_my = _mm256_setzero_pd();

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d idx = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(i)), lanes);
    const __m256d dx = _mm256_sub_pd(_mm256_fmadd_pd(idx, du, u0), mx);
    const __m256d g = _mm256_loadu_pd(gauss + i);
    const __m256d t = _mm256_loadu_pd(trans + i);
    const __m256d alpha = _mm256_mul_pd(op, g);
    const __m256d br = _mm256_loadu_pd(behind_r + i);
    const __m256d bg = _mm256_loadu_pd(behind_g + i);
    const __m256d bb = _mm256_loadu_pd(behind_b + i);
    const __m256d er = _mm256_sub_pd(cr, br);
    const __m256d eg = _mm256_sub_pd(cg, bg);
    const __m256d eb = _mm256_sub_pd(cb, bb);
    const __m256d gr = _mm256_loadu_pd(grad_r + i);
    const __m256d gg = _mm256_loadu_pd(grad_g + i);
    const __m256d gb = _mm256_loadu_pd(grad_b + i);
    __m256d dot = _mm256_mul_pd(gr, er);
    dot = _mm256_fmadd_pd(gg, eg, dot);
    dot = _mm256_fmadd_pd(gb, eb, dot);
    const __m256d d_alpha = _mm256_mul_pd(t, dot);
    const __m256d at = _mm256_mul_pd(alpha, t);
    s_cr = _mm256_fmadd_pd(gr, at, s_cr);
    s_cg = _mm256_fmadd_pd(gg, at, s_cg);
    s_cb = _mm256_fmadd_pd(gb, at, s_cb);
    s_op = _mm256_fmadd_pd(d_alpha, g, s_op);
    const __m256d d_q = _mm256_mul_pd(_mm256_mul_pd(mhalf, alpha), d_alpha);
    const __m256d ax = _mm256_fmadd_pd(ca, dx, _mm256_mul_pd(cbv, dy));
    const __m256d ay = _mm256_fmadd_pd(cbv, dx, _mm256_mul_pd(ccv, dy));
    s_a = _mm256_fmadd_pd(_mm256_mul_pd(d_q, dx), dx, s_a);
    s_b = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_mul_pd(d_q, two), dx), dy, s_b);
    s_c = _mm256_fmadd_pd(_mm256_mul_pd(d_q, dy), dy, s_c);
    s_mx = _mm256_fmadd_pd(_mm256_mul_pd(mtwo, d_q), ax, s_mx);
    s_my = _mm256_fmadd_pd(_mm256_mul_pd(mtwo, d_q), ay, s_my);
    if (jac != nullptr) {
      const __m256d kx = _mm256_mul_pd(at, ax);
      const __m256d ky = _mm256_mul_pd(at, ay);
      _mm256_storeu_pd(jac[0] + i, _mm256_mul_pd(kx, er));
      _mm256_storeu_pd(jac[1] + i, _mm256_mul_pd(kx, eg));
      _mm256_storeu_pd(jac[2] + i, _mm256_mul_pd(kx, eb));
      _mm256_storeu_pd(jac[3] + i, _mm256_mul_pd(ky, er));
      _mm256_storeu_pd(jac[4] + i, _mm256_mul_pd(ky, eg));
      _mm256_storeu_pd(jac[5] + i, _mm256_mul_pd(ky, eb));
    }
    const __m256d keep = _mm256_sub_pd(one, alpha);
    _mm256_storeu_pd(behind_r + i, _mm256_fmadd_pd(cr, alpha, _mm256_mul_pd(keep, br)));
    _mm256_storeu_pd(behind_g + i, _mm256_fmadd_pd(cg, alpha, _mm256_mul_pd(keep, bg)));
    _mm256_storeu_pd(behind_b + i, _mm256_fmadd_pd(cb, alpha, _mm256_mul_pd(keep, bb)));
  }

  sums.d_color[0] += hsum(s_cr);
  sums.d_color[1] += hsum(s_cg);
  sums.d_color[2] += hsum(s_cb);
  sums.d_opacity += hsum(s_op);
  sums.d_conic_a += hsum(s_a);
  sums.d_conic_b += hsum(s_b);
  sums.d_conic_c += hsum(s_c);
  sums.d_mean_x += hsum(s_mx);
  sums.d_mean_y += hsum(s_my);

  if (i < n) {
    SplatRow tail = s;
    tail.u0 = s.u0 + static_cast<double>(i) * s.du;
    double* tail_jac[6];
    if (jac != nullptr) {
      for (int k = 0; k < 6; ++k) tail_jac[k] = jac[k] + i;
    }
    scalar::composite_backward(tail, n - i, gauss + i, trans + i, grad_r + i,
                               grad_g + i, grad_b + i, behind_r + i,
                               behind_g + i, behind_b + i, sums,
                               jac != nullptr ? tail_jac : nullptr);
  }
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void exp(std::size_t n, const double* x, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  if (i < n) {
    double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = i; k < n; ++k) buf[k - i] = x[k];
    double res[4];
    _mm256_storeu_pd(res, exp_pd(_mm256_loadu_pd(buf)));
    for (std::size_t k = i; k < n; ++k) out[k] = res[k - i];
  }
}

namespace {

// R rows of C, columns [j, j + 4 * V).
template <int R, int V>
inline void nn_tile(std::size_t k, const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc) {
  __m256d acc[R][V];
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < V; ++v) acc[r][v] = _mm256_loadu_pd(c + r * ldc + 4 * v);
  for (std::size_t p = 0; p < k; ++p) {
    __m256d bv[V];
    for (int v = 0; v < V; ++v) bv[v] = _mm256_loadu_pd(b + p * ldb + 4 * v);
    for (int r = 0; r < R; ++r) {
      const __m256d av = _mm256_broadcast_sd(a + r * lda + p);
      for (int v = 0; v < V; ++v) acc[r][v] = _mm256_fmadd_pd(av, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < V; ++v) _mm256_storeu_pd(c + r * ldc + 4 * v, acc[r][v]);
}

// Column panel [j, j + 4 * V) of C over all rows. The k x 4V panel of B is
// packed first: with power-of-two row strides its rows would alias in L1.
template <int V>
inline void nn_panel(std::size_t m, std::size_t k, const double* a, std::size_t lda,
                     const double* b, std::size_t ldb, double* c, std::size_t ldc,
                     std::vector<double>& pack) {
  constexpr std::size_t w = 4 * V;
  pack.resize(k * w);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t v = 0; v < w; ++v) pack[p * w + v] = b[p * ldb + v];
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) nn_tile<4, V>(k, a + i * lda, lda, pack.data(), w, c + i * ldc, ldc);
  for (; i < m; ++i) nn_tile<1, V>(k, a + i * lda, lda, pack.data(), w, c + i * ldc, ldc);
}

// RA rows of A against RB rows of B.
template <int RA, int RB>
inline void nt_tile(std::size_t k, const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc) {
  __m256d acc[RA][RB];
  for (int r = 0; r < RA; ++r)
    for (int s = 0; s < RB; ++s) acc[r][s] = _mm256_setzero_pd();
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    __m256d bv[RB];
    for (int s = 0; s < RB; ++s) bv[s] = _mm256_loadu_pd(b + s * ldb + p);
    for (int r = 0; r < RA; ++r) {
      const __m256d av = _mm256_loadu_pd(a + r * lda + p);
      for (int s = 0; s < RB; ++s) acc[r][s] = _mm256_fmadd_pd(av, bv[s], acc[r][s]);
    }
  }
  for (int r = 0; r < RA; ++r) {
    for (int s = 0; s < RB; ++s) {
      double sum = hsum(acc[r][s]);
      for (std::size_t q = p; q < k; ++q) sum += a[r * lda + q] * b[s * ldb + q];
      c[r * ldc + s] += sum;
    }
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  thread_local std::vector<double> pack;
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) nn_panel<2>(m, k, a, lda, b + j, ldb, c + j, ldc, pack);
  for (; j + 4 <= n; j += 4) nn_panel<1>(m, k, a, lda, b + j, ldb, c + j, ldc, pack);
  for (; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] += s;
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4)
      nt_tile<2, 4>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j, ldc);
    for (; j < n; ++j) nt_tile<2, 1>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j, ldc);
  }
  for (; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      nt_tile<1, 1>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j, ldc);
}

}  // namespace sls::simd::avx2

#else

namespace sls::simd::avx2 {
bool compiled() { return false; }
void composite_forward(const SplatRow&, std::size_t, double*, double*, double*,
                       double*, double*, double*) {}
void composite_backward(const SplatRow&, std::size_t, const double*,
                        const double*, const double*, const double*,
                        const double*, double*, double*, double*, RowGradSums&,
                        double* const*) {}
void axpy(std::size_t, double, const double*, double*) {}
double dot(std::size_t, const double*, const double*) { return 0.0; }
void exp(std::size_t, const double*, double*) {}
void gemm_nn(std::size_t, std::size_t, std::size_t, const double*, std::size_t, const double*,
             std::size_t, double*, std::size_t) {}
void gemm_nt(std::size_t, std::size_t, std::size_t, const double*, std::size_t, const double*,
             std::size_t, double*, std::size_t) {}
}  // namespace sls::simd::avx2

#endif
