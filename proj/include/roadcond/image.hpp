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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace roadcond {

// 8-bit interleaved RGB raster, row-major.
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  RawImage() = default;
  RawImage(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

  std::uint8_t* pixel(std::size_t x, std::size_t y) { return &rgb[(y * width + x) * 3]; }
  const std::uint8_t* pixel(std::size_t x, std::size_t y) const { return &rgb[(y * width + x) * 3]; }
};

// Float RGB image with values in [0,1], row-major interleaved.
struct FloatImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> rgb;

  FloatImage() = default;
  FloatImage(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0.0f) {}

  std::span<float> row(std::size_t y) { return {rgb.data() + y * width * 3, width * 3}; }
  std::span<const float> row(std::size_t y) const { return {rgb.data() + y * width * 3, width * 3}; }
  float at(std::size_t x, std::size_t y, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
};

inline constexpr std::size_t kModelImageSize = 224;

struct PreprocessedImage {
  FloatImage pixels;  // always 224x224x3
  std::string source_id;
};

// Bilinear resampling with half-pixel centres; resizing to the same size is
// an exact identity.
FloatImage resize_bilinear(const FloatImage& src, std::size_t out_width, std::size_t out_height);

// First row kept after dropping the top 20% of an image of height h.
constexpr std::size_t crop_first_row(std::size_t height) { return (height * 2) / 10; }

// Drop the top 20% of rows, scale to [0,1], resize to 224x224.
// Throws std::invalid_argument for images smaller than 5x5.
PreprocessedImage preprocess_image(const RawImage& raw, std::string source_id = {});

// Binary PPM (P6, maxval 255). Throws DataError on malformed files.
RawImage read_ppm(const std::string& path);
void write_ppm(const RawImage& image, const std::string& path);

}  // namespace roadcond
