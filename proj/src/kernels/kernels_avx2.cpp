// Copyright 2026 The roadcond Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Compiled with -mavx2; only reached through avx2_table() after a runtime CPU
// check.

#include <immintrin.h>

#include <algorithm>

#include "roadcond/kernels.hpp"

namespace roadcond::kernels {

namespace {

void lerp_avx2(const float* a, const float* b, float t, float* out, std::size_t n) {
  const __m256 vt = _mm256_set1_ps(t);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    // mul then add, no fma: keeps results bit-identical to the scalar path.
    _mm256_storeu_ps(out + i, _mm256_add_ps(va, _mm256_mul_ps(vt, _mm256_sub_ps(vb, va))));
  }
  for (; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
}

void u8_to_unit_avx2(const std::uint8_t* in, float* out, std::size_t n) {
  constexpr float kInv = 1.0f / 255.0f;
  const __m256 vinv = _mm256_set1_ps(kInv);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(in + i));
    const __m256 f = _mm256_cvtepi32_ps(_mm256_cvtepu8_epi32(bytes));
    _mm256_storeu_ps(out + i, _mm256_mul_ps(f, vinv));
  }
  for (; i < n; ++i) out[i] = static_cast<float>(in[i]) * kInv;
}

void affine_clamp_avx2(float* data, std::size_t n, float scale, float offset, float lo, float hi) {
  const __m256 vs = _mm256_set1_ps(scale);
  const __m256 vo = _mm256_set1_ps(offset);
  const __m256 vlo = _mm256_set1_ps(lo);
  const __m256 vhi = _mm256_set1_ps(hi);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_add_ps(_mm256_mul_ps(_mm256_loadu_ps(data + i), vs), vo);
    v = _mm256_min_ps(_mm256_max_ps(v, vlo), vhi);
    _mm256_storeu_ps(data + i, v);
  }
  for (; i < n; ++i) {
    const float v = data[i] * scale + offset;
    data[i] = std::min(std::max(v, lo), hi);
  }
}

float sum_avx2(const float* data, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(data + i);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) total += data[i];
  return static_cast<float>(total);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::kAvx2, lerp_avx2, u8_to_unit_avx2, affine_clamp_avx2,
                                 sum_avx2};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
}

}  // namespace roadcond::kernels
