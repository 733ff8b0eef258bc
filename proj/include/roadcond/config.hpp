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
#include <optional>
#include <string>

#include "json.hpp"
#include "roadcond/domain.hpp"

namespace roadcond {

struct ForestParams {
  std::size_t n_estimators = 300;
  std::optional<std::size_t> max_depth = 10;  // nullopt = grow until pure
  std::size_t max_features = 3;
  std::size_t min_samples_leaf = 5;
  bool bootstrap = true;
  double max_samples = 0.5;  // fraction of training rows drawn per tree
  bool balanced_class_weights = true;

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
  bool operator==(const ForestParams&) const = default;
};

// Stage-2 defaults are the selected random forest: 300 trees, depth 10,
// 3 features per split, 5 samples per leaf, bootstrap on half the rows.
ForestParams default_stage2_params();
// Smaller forest over the 88 image features used by the builtin stage-1
// classifier.
ForestParams default_baseline_params();

struct PipelineConfig {
  ForestParams stage2 = default_stage2_params();
  ForestParams baseline = default_baseline_params();
  double selection_tau = 0.01;
  SeverityOrder severity = SeverityOrder::surface_default();
  AdjacencyMap adjacency = AdjacencyMap::surface_default();
  std::uint64_t seed = 42;
  std::size_t outer_folds = 6;
  std::size_t inner_folds = 5;
  std::size_t train1_folds = 3;
  std::size_t train2_folds = 1;
  double max_missing_weather_fraction = 0.2;
  double fold_balance_tolerance = 0.1;
  std::size_t deploy_outer_fold = 0;
  std::size_t obstruction_sets = 3;
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json to_json(const ForestParams& p);
// Missing keys keep the values already in `base`.
ForestParams forest_params_from_json(const nlohmann::json& j, ForestParams base = {});

nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

// Reads a JSON config file; throws UsageError on unreadable or invalid files.
PipelineConfig load_config(const std::string& path);
void save_config(const PipelineConfig& config, const std::string& path);

}  // namespace roadcond
