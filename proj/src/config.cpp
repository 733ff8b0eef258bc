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

#include "roadcond/config.hpp"

#include <fstream>
#include <stdexcept>

#include "roadcond/error.hpp"

namespace roadcond {

using nlohmann::json;

void ForestParams::validate() const {
  if (n_estimators < 1) throw std::invalid_argument("n_estimators must be >= 1");
  if (max_depth && *max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  if (max_features < 1) throw std::invalid_argument("max_features must be >= 1");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
  if (!(max_samples > 0.0 && max_samples <= 1.0)) {
    throw std::invalid_argument("max_samples must be in (0, 1]");
  }
}

ForestParams default_stage2_params() { return ForestParams{}; }

ForestParams default_baseline_params() {
  ForestParams p;
  p.n_estimators = 40;
  p.max_depth = 8;
  p.max_features = 9;
  p.min_samples_leaf = 3;
  p.bootstrap = true;
  p.max_samples = 1.0;
  return p;
}

void PipelineConfig::validate() const {
  stage2.validate();
  baseline.validate();
  if (severity.size() != kNumSurfaceClasses) {
    throw std::invalid_argument("severity order must rank the five surface classes");
  }
  if (outer_folds < 3) throw std::invalid_argument("outer_folds must be >= 3");
  if (inner_folds + 1 != outer_folds) {
    throw std::invalid_argument("inner_folds must equal outer_folds - 1");
  }
  if (train1_folds < 1 || train2_folds < 1 || train1_folds + train2_folds + 2 != outer_folds) {
    throw std::invalid_argument("train1_folds + train2_folds must equal outer_folds - 2");
  }
  if (selection_tau < 0.0) throw std::invalid_argument("selection_tau must be >= 0");
  if (!(max_missing_weather_fraction >= 0.0 && max_missing_weather_fraction <= 1.0)) {
    throw std::invalid_argument("max_missing_weather_fraction must be in [0,1]");
  }
  if (deploy_outer_fold >= outer_folds) {
    throw std::invalid_argument("deploy_outer_fold out of range");
  }
  if (obstruction_sets < 1) throw std::invalid_argument("obstruction_sets must be >= 1");
}

json to_json(const ForestParams& p) {
  return json{{"n_estimators", p.n_estimators},
              {"max_depth", p.max_depth ? json(*p.max_depth) : json(nullptr)},
              {"max_features", p.max_features},
              {"min_samples_leaf", p.min_samples_leaf},
              {"bootstrap", p.bootstrap},
              {"max_samples", p.max_samples},
              {"balanced_class_weights", p.balanced_class_weights}};
}

ForestParams forest_params_from_json(const json& j, ForestParams p) {
  if (!j.is_object()) throw std::invalid_argument("forest parameters must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "n_estimators") p.n_estimators = value.get<std::size_t>();
    else if (key == "max_depth") {
      if (value.is_null()) p.max_depth.reset();
      else p.max_depth = value.get<std::size_t>();
    } else if (key == "max_features") p.max_features = value.get<std::size_t>();
    else if (key == "min_samples_leaf") p.min_samples_leaf = value.get<std::size_t>();
    else if (key == "bootstrap") p.bootstrap = value.get<bool>();
    else if (key == "max_samples") p.max_samples = value.get<double>();
    else if (key == "balanced_class_weights") p.balanced_class_weights = value.get<bool>();
    else throw std::invalid_argument("unknown forest parameter '" + key + "'");
  }
  return p;
}

json to_json(const PipelineConfig& c) {
  json severity = json::array();
  for (std::size_t idx : c.severity.order()) severity.push_back(to_string(surface_class_at(idx)));
  json adjacency = json::object();
  for (SurfaceClass a : kAllSurfaceClasses) {
    json list = json::array();
    for (SurfaceClass b : c.adjacency.neighbours(a)) list.push_back(to_string(b));
    adjacency[std::string(to_string(a))] = list;
  }
  return json{{"stage2_forest", to_json(c.stage2)},
              {"baseline_forest", to_json(c.baseline)},
              {"selection_tau", c.selection_tau},
              {"severity_order", severity},
              {"adjacency", adjacency},
              {"seed", c.seed},
              {"outer_folds", c.outer_folds},
              {"inner_folds", c.inner_folds},
              {"train1_folds", c.train1_folds},
              {"train2_folds", c.train2_folds},
              {"max_missing_weather_fraction", c.max_missing_weather_fraction},
              {"fold_balance_tolerance", c.fold_balance_tolerance},
              {"deploy_outer_fold", c.deploy_outer_fold},
              {"obstruction_sets", c.obstruction_sets},
              {"threads", c.threads}};
}

namespace {

SurfaceClass surface_from_json(const json& v) {
  const auto name = v.get<std::string>();
  auto c = parse_surface_class(name);
  if (!c) throw std::invalid_argument("unknown surface class '" + name + "'");
  return *c;
}

}  // namespace

PipelineConfig config_from_json(const json& j, PipelineConfig c) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "stage2_forest") c.stage2 = forest_params_from_json(value, c.stage2);
    else if (key == "baseline_forest") c.baseline = forest_params_from_json(value, c.baseline);
    else if (key == "selection_tau") c.selection_tau = value.get<double>();
    else if (key == "severity_order") {
      std::vector<SurfaceClass> order;
      for (const auto& v : value) order.push_back(surface_from_json(v));
      c.severity = SeverityOrder::from_surface(order);
    } else if (key == "adjacency") {
      std::array<std::array<bool, kNumSurfaceClasses>, kNumSurfaceClasses> edges{};
      for (const auto& [from, list] : value.items()) {
        const SurfaceClass a = surface_from_json(json(from));
        for (const auto& to : list) edges[index_of(a)][index_of(surface_from_json(to))] = true;
      }
      c.adjacency = AdjacencyMap(edges);
    } else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "outer_folds") c.outer_folds = value.get<std::size_t>();
    else if (key == "inner_folds") c.inner_folds = value.get<std::size_t>();
    else if (key == "train1_folds") c.train1_folds = value.get<std::size_t>();
    else if (key == "train2_folds") c.train2_folds = value.get<std::size_t>();
    else if (key == "max_missing_weather_fraction") c.max_missing_weather_fraction = value.get<double>();
    else if (key == "fold_balance_tolerance") c.fold_balance_tolerance = value.get<double>();
    else if (key == "deploy_outer_fold") c.deploy_outer_fold = value.get<std::size_t>();
    else if (key == "obstruction_sets") c.obstruction_sets = value.get<std::size_t>();
    else if (key == "threads") c.threads = value.get<std::size_t>();
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  try {
    return config_from_json(json::parse(in));
  } catch (const std::exception& e) {
    throw UsageError("invalid config file " + path + ": " + e.what());
  }
}

void save_config(const PipelineConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write config file " + path);
  out << to_json(config).dump(2) << '\n';
}

}  // namespace roadcond
