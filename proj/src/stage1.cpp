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

#include "roadcond/stage1.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "roadcond/error.hpp"
#include "roadcond/kernels.hpp"

namespace roadcond {

using nlohmann::json;

FeatureVector extract_features(const PreprocessedImage& image) {
  const FloatImage& px = image.pixels;
  if (px.width != kModelImageSize || px.height != kModelImageSize) {
    throw std::invalid_argument("extract_features expects a 224x224 preprocessed image");
  }
  constexpr std::size_t kBlock = kModelImageSize / kLuminanceGrid;  // 28
  FeatureVector out{};

  // Interleaved RGB: a block's span within one row is 28*3 contiguous floats,
  // so the block sum of R+G+B is a sum of contiguous runs.
  std::array<double, kLuminanceGrid * kLuminanceGrid> block_sums{};
  for (std::size_t y = 0; y < kModelImageSize; ++y) {
    const auto row = px.row(y);
    const std::size_t by = y / kBlock;
    for (std::size_t bx = 0; bx < kLuminanceGrid; ++bx) {
      block_sums[by * kLuminanceGrid + bx] += kernels::sum(row.subspan(bx * kBlock * 3, kBlock * 3));
    }
  }
  constexpr double kBlockSamples = static_cast<double>(kBlock * kBlock * 3);
  for (std::size_t b = 0; b < block_sums.size(); ++b) {
    out[b] = std::clamp(block_sums[b] / kBlockSamples, 0.0, 1.0);
  }

  std::array<std::size_t, 3 * kHistogramBins> hist{};
  for (std::size_t i = 0; i < px.rgb.size(); ++i) {
    const auto bin = std::min<std::size_t>(kHistogramBins - 1,
                                           static_cast<std::size_t>(px.rgb[i] * static_cast<float>(kHistogramBins)));
    ++hist[(i % 3) * kHistogramBins + bin];
  }
  constexpr double kPixels = static_cast<double>(kModelImageSize * kModelImageSize);
  for (std::size_t h = 0; h < hist.size(); ++h) {
    out[kLuminanceGrid * kLuminanceGrid + h] = static_cast<double>(hist[h]) / kPixels;
  }
  return out;
}

std::vector<std::string> image_feature_names() {
  std::vector<std::string> names;
  for (std::size_t r = 0; r < kLuminanceGrid; ++r) {
    for (std::size_t c = 0; c < kLuminanceGrid; ++c) {
      names.push_back("lum_r" + std::to_string(r) + "c" + std::to_string(c));
    }
  }
  for (const char* ch : {"r", "g", "b"}) {
    for (std::size_t b = 0; b < kHistogramBins; ++b) names.push_back(std::string("hist_") + ch + std::to_string(b));
  }
  return names;
}

std::string_view to_string(Stage1Kind kind) {
  return kind == Stage1Kind::kBuiltinBaseline ? "builtin" : "external";
}

Stage1Model train_baseline(const FeatureMatrix& features, std::span<const std::size_t> labels,
                           std::size_t n_classes, const ForestParams& params, std::uint64_t seed,
                           std::vector<std::size_t> training_folds) {
  std::set<std::size_t> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DataError("stage-1 training data contains fewer than two classes");
  Stage1Model model;
  model.kind = Stage1Kind::kBuiltinBaseline;
  model.n_classes = n_classes;
  model.training_folds = std::move(training_folds);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (!present.contains(c)) {
      model.warnings.push_back("class " + std::to_string(c) +
                               " absent from stage-1 training data; it is predicted with probability 0");
    }
  }
  std::vector<std::string> names;
  if (features.cols() == kImageFeatureCount) names = image_feature_names();
  model.forest = fit_forest(features, labels, n_classes, params, seed, std::move(names));
  return model;
}

Stage1Model external_stage1_model() {
  Stage1Model model;
  model.kind = Stage1Kind::kExternalProbabilities;
  return model;
}

std::vector<double> predict_stage1_raw(const Stage1Model& model, const Observation& observation,
                                       std::span<const double> features) {
  if (model.kind == Stage1Kind::kExternalProbabilities) {
    if (!observation.stage1_probs) {
      throw DataError("observation '" + observation.id + "' has no stage-1 probabilities");
    }
    const auto& p = observation.stage1_probs->values();
    return {p.begin(), p.end()};
  }
  if (!model.forest) throw std::logic_error("builtin stage-1 model has no forest");
  return model.forest->predict_proba(features);
}

ClassProbabilities predict_stage1(const Stage1Model& model, const Observation& observation,
                                  std::span<const double> features) {
  if (model.n_classes != kNumSurfaceClasses) {
    throw std::invalid_argument("stage-1 model is not a surface-condition model");
  }
  return ClassProbabilities::normalized(predict_stage1_raw(model, observation, features));
}

json to_json(const Stage1Model& model) {
  json j{{"kind", to_string(model.kind)},
         {"n_classes", model.n_classes},
         {"training_folds", model.training_folds},
         {"warnings", model.warnings}};
  if (model.forest) j["forest"] = to_json(*model.forest);
  return j;
}

Stage1Model stage1_from_json(const json& j) {
  Stage1Model m;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "builtin") m.kind = Stage1Kind::kBuiltinBaseline;
  else if (kind == "external") m.kind = Stage1Kind::kExternalProbabilities;
  else throw DataError("unknown stage-1 kind '" + kind + "'");
  m.n_classes = j.at("n_classes").get<std::size_t>();
  m.training_folds = j.at("training_folds").get<std::vector<std::size_t>>();
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (j.contains("forest")) m.forest = forest_from_json(j.at("forest"));
  if (m.kind == Stage1Kind::kBuiltinBaseline && !m.forest) throw DataError("builtin stage-1 model without forest");
  return m;
}

}  // namespace roadcond
