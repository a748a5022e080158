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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"
#include "sls/simd.hpp"

namespace sls::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable kScalar{Backend::kScalar,          "scalar",
                          &scalar::composite_forward, &scalar::composite_backward,
                          &scalar::axpy,              &scalar::dot,
                          &scalar::exp, &scalar::gemm_nn, &scalar::gemm_nt};

const KernelTable kAvx2{Backend::kAvx2,          "avx2",
                        &avx2::composite_forward, &avx2::composite_backward,
                        &avx2::axpy,              &avx2::dot,
                        &avx2::exp, &avx2::gemm_nn, &avx2::gemm_nt};

const KernelTable* initial_table() {
  const char* env = std::getenv("SLS_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return &kScalar;
  if (const KernelTable* t = avx2_kernels()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
  static const bool ok = avx2::compiled() && cpu_has_avx2();
  return ok ? &kAvx2 : nullptr;
}

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

bool set_backend(Backend b) {
  if (b == Backend::kScalar) {
    active().store(&kScalar);
    return true;
  }
  const KernelTable* t = avx2_kernels();
  if (t == nullptr) return false;
  active().store(t);
  return true;
}

}  // namespace sls::simd
