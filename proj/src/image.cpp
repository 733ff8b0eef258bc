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

#include "roadcond/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "roadcond/error.hpp"
#include "roadcond/kernels.hpp"

namespace roadcond {

namespace {

struct Tap {
  std::size_t i0;
  std::size_t i1;
  float t;
};

std::vector<Tap> make_taps(std::size_t in_size, std::size_t out_size) {
  std::vector<Tap> taps(out_size);
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  for (std::size_t o = 0; o < out_size; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in_size - 1);
    taps[o] = {i0, i1, static_cast<float>(src - static_cast<double>(i0))};
  }
  return taps;
}

}  // namespace

FloatImage resize_bilinear(const FloatImage& src, std::size_t out_width, std::size_t out_height) {
  if (src.width == 0 || src.height == 0 || out_width == 0 || out_height == 0) {
    throw std::invalid_argument("resize of an empty image");
  }
  const auto row_taps = make_taps(src.height, out_height);
  const auto col_taps = make_taps(src.width, out_width);
  FloatImage out(out_width, out_height);
  std::vector<float> blended(src.width * 3);
  for (std::size_t y = 0; y < out_height; ++y) {
    const Tap& ty = row_taps[y];
    kernels::lerp(src.row(ty.i0), src.row(ty.i1), ty.t, blended);
    auto dst = out.row(y);
    for (std::size_t x = 0; x < out_width; ++x) {
      const Tap& tx = col_taps[x];
      for (std::size_t c = 0; c < 3; ++c) {
        const float a = blended[tx.i0 * 3 + c];
        const float b = blended[tx.i1 * 3 + c];
        dst[x * 3 + c] = a + tx.t * (b - a);
      }
    }
  }
  return out;
}

PreprocessedImage preprocess_image(const RawImage& raw, std::string source_id) {
  if (raw.width < 5 || raw.height < 5) {
    throw std::invalid_argument("image too small for preprocessing (need at least 5x5)");
  }
  if (raw.rgb.size() != raw.width * raw.height * 3) {
    throw std::invalid_argument("image buffer size does not match its dimensions");
  }
  const std::size_t first_row = crop_first_row(raw.height);
  FloatImage cropped(raw.width, raw.height - first_row);
  const std::size_t offset = first_row * raw.width * 3;
  kernels::u8_to_unit(std::span(raw.rgb).subspan(offset, cropped.rgb.size()), cropped.rgb);
  PreprocessedImage out;
  out.pixels = resize_bilinear(cropped, kModelImageSize, kModelImageSize);
  kernels::affine_clamp(out.pixels.rgb, 1.0f, 0.0f, 0.0f, 1.0f);
  out.source_id = std::move(source_id);
  return out;
}

namespace {

// Reads the next whitespace-separated header token, skipping # comments.
std::string next_token(std::istream& in) {
  std::string token;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(ch);
  }
  return token;
}

}  // namespace

RawImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path);
  if (next_token(in) != "P6") throw DataError("not a binary PPM (P6) image: " + path);
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception&) {
    throw DataError("malformed PPM header: " + path);
  }
  if (maxval != 255 || w == 0 || h == 0) throw DataError("unsupported PPM header: " + path);
  RawImage img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
    throw DataError("truncated PPM image: " + path);
  }
  return img;
}

void write_ppm(const RawImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
}

}  // namespace roadcond
