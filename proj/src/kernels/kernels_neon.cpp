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

#include <arm_neon.h>

#include <algorithm>

#include "roadcond/kernels.hpp"

namespace roadcond::kernels {

namespace {

void lerp_neon(const float* a, const float* b, float t, float* out, std::size_t n) {
  const float32x4_t vt = vdupq_n_f32(t);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t va = vld1q_f32(a + i);
    const float32x4_t vb = vld1q_f32(b + i);
    vst1q_f32(out + i, vaddq_f32(va, vmulq_f32(vt, vsubq_f32(vb, va))));
  }
  for (; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
}

void u8_to_unit_neon(const std::uint8_t* in, float* out, std::size_t n) {
  constexpr float kInv = 1.0f / 255.0f;
  const float32x4_t vinv = vdupq_n_f32(kInv);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const uint16x8_t wide = vmovl_u8(vld1_u8(in + i));
    const float32x4_t lo = vcvtq_f32_u32(vmovl_u16(vget_low_u16(wide)));
    const float32x4_t hi = vcvtq_f32_u32(vmovl_u16(vget_high_u16(wide)));
    vst1q_f32(out + i, vmulq_f32(lo, vinv));
    vst1q_f32(out + i + 4, vmulq_f32(hi, vinv));
  }
  for (; i < n; ++i) out[i] = static_cast<float>(in[i]) * kInv;
}

void affine_clamp_neon(float* data, std::size_t n, float scale, float offset, float lo, float hi) {
  const float32x4_t vs = vdupq_n_f32(scale);
  const float32x4_t vo = vdupq_n_f32(offset);
  const float32x4_t vlo = vdupq_n_f32(lo);
  const float32x4_t vhi = vdupq_n_f32(hi);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t v = vaddq_f32(vmulq_f32(vld1q_f32(data + i), vs), vo);
    vst1q_f32(data + i, vminq_f32(vmaxq_f32(v, vlo), vhi));
  }
  for (; i < n; ++i) {
    const float v = data[i] * scale + offset;
    data[i] = std::min(std::max(v, lo), hi);
  }
}

float sum_neon(const float* data, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(data + i);
    acc0 = vaddq_f64(acc0, vcvt_f64_f32(vget_low_f32(v)));
    acc1 = vaddq_f64(acc1, vcvt_high_f64_f32(v));
  }
  double total = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) total += data[i];
  return static_cast<float>(total);
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{Isa::kNeon, lerp_neon, u8_to_unit_neon, affine_clamp_neon,
                                 sum_neon};
  return &table;
}

}  // namespace roadcond::kernels
