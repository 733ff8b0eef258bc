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

#pragma once

// Data-parallel inner loops used by image preprocessing, feature extraction
// and the synthetic renderer. Each kernel has a scalar reference
// implementation and optional SIMD variants; the variant is picked once at
// runtime from CPU capabilities. Setting ROADCOND_SIMD=scalar|avx2|neon
// forces a specific table (falls back to scalar if unsupported).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace roadcond::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  // out[i] = a[i] + t * (b[i] - a[i])
  void (*lerp_f32)(const float* a, const float* b, float t, float* out, std::size_t n);
  // out[i] = in[i] / 255
  void (*u8_to_unit_f32)(const std::uint8_t* in, float* out, std::size_t n);
  // data[i] = clamp(data[i] * scale + offset, lo, hi)
  void (*affine_clamp_f32)(float* data, std::size_t n, float scale, float offset, float lo,
                           float hi);
  float (*sum_f32)(const float* data, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// Tables usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

// The dispatched table; selected on first call and fixed afterwards.
const KernelTable& active();

inline void lerp(std::span<const float> a, std::span<const float> b, float t,
                 std::span<float> out) {
  active().lerp_f32(a.data(), b.data(), t, out.data(), out.size());
}

inline void u8_to_unit(std::span<const std::uint8_t> in, std::span<float> out) {
  active().u8_to_unit_f32(in.data(), out.data(), out.size());
}

inline void affine_clamp(std::span<float> data, float scale, float offset, float lo, float hi) {
  active().affine_clamp_f32(data.data(), data.size(), scale, offset, lo, hi);
}

inline float sum(std::span<const float> data) { return active().sum_f32(data.data(), data.size()); }

}  // namespace roadcond::kernels
