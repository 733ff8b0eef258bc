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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "roadcond/domain.hpp"
#include "roadcond/forest.hpp"
#include "roadcond/image.hpp"

namespace roadcond {

// 64 block-luminance means over an 8x8 grid of 28x28 blocks, then 8-bin
// normalised histograms of the R, G and B channels.
inline constexpr std::size_t kLuminanceGrid = 8;
inline constexpr std::size_t kHistogramBins = 8;
inline constexpr std::size_t kImageFeatureCount =
    kLuminanceGrid * kLuminanceGrid + 3 * kHistogramBins;  // 88

using FeatureVector = std::array<double, kImageFeatureCount>;

FeatureVector extract_features(const PreprocessedImage& image);
std::vector<std::string> image_feature_names();

enum class Stage1Kind { kBuiltinBaseline, kExternalProbabilities };
std::string_view to_string(Stage1Kind kind);

struct Stage1Model {
  Stage1Kind kind = Stage1Kind::kBuiltinBaseline;
  std::size_t n_classes = kNumSurfaceClasses;
  std::optional<ForestModel> forest;  // builtin only
  // Folds the model was trained on, kept for leakage audits.
  std::vector<std::size_t> training_folds;
  std::vector<std::string> warnings;

  bool operator==(const Stage1Model&) const = default;
};

// Fits the builtin image classifier (random forest over image features,
// balanced class weights). Classes absent from the training data get zero
// probability and a warning. Throws DataError for single-class data.
Stage1Model train_baseline(const FeatureMatrix& features, std::span<const std::size_t> labels,
                           std::size_t n_classes, const ForestParams& params, std::uint64_t seed,
                           std::vector<std::size_t> training_folds = {});

// Marker model for runs backed by an externally produced probability file.
Stage1Model external_stage1_model();

// Raw (uncalibrated) class probabilities. `features` is only read by the
// builtin kind. Throws DataError when an external-kind observation carries
// no probabilities.
std::vector<double> predict_stage1_raw(const Stage1Model& model, const Observation& observation,
                                       std::span<const double> features);
ClassProbabilities predict_stage1(const Stage1Model& model, const Observation& observation,
                                  std::span<const double> features);

nlohmann::json to_json(const Stage1Model& model);
Stage1Model stage1_from_json(const nlohmann::json& j);

}  // namespace roadcond
