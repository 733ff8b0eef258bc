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

#include <algorithm>

#include "roadcond/kernels.hpp"

namespace roadcond::kernels {

namespace {

void lerp_scalar(const float* a, const float* b, float t, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
}

void u8_to_unit_scalar(const std::uint8_t* in, float* out, std::size_t n) {
  constexpr float kInv = 1.0f / 255.0f;
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(in[i]) * kInv;
}

void affine_clamp_scalar(float* data, std::size_t n, float scale, float offset, float lo,
                         float hi) {
  for (std::size_t i = 0; i < n; ++i) {
    const float v = data[i] * scale + offset;
    data[i] = std::min(std::max(v, lo), hi);
  }
}

float sum_scalar(const float* data, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += data[i];
  return static_cast<float>(acc);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::kScalar, lerp_scalar, u8_to_unit_scalar,
                                 affine_clamp_scalar, sum_scalar};
  return table;
}

}  // namespace roadcond::kernels
