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
#include "roadcond/config.hpp"
#include "roadcond/domain.hpp"

namespace roadcond {

// Dense row-major matrix of training or inference features.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t cols) : cols_(cols) {}
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  // Throws std::invalid_argument if the row length differs from cols().
  void push_row(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// w_c = N / (K * n_c) with K the number of classes present; absent classes
// get weight 0. Throws std::invalid_argument for empty input.
std::vector<double> balanced_weights(std::span<const std::size_t> labels, std::size_t n_classes);
std::array<double, kNumSurfaceClasses> balanced_weights(std::span<const SurfaceClass> labels);

// Gini impurity 1 - sum (c_k / W)^2 of a weighted class-count vector.
double gini(std::span<const double> counts);

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  // gini(parent) - W_L/W gini(left) - W_R/W gini(right)
  double decrease = 0.0;
};

// Decreases closer than this are treated as ties.
inline constexpr double kSplitTieEpsilon = 1e-12;

// Searches midpoints between consecutive distinct values of each candidate
// feature over `rows`. Ties go to the lower feature index, then the lower
// threshold. Returns nullopt when no split has positive decrease with both
// children holding at least `min_samples_leaf` rows.
std::optional<SplitCandidate> best_split(const FeatureMatrix& x, std::span<const std::size_t> labels,
                                         std::span<const double> row_weights,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> features,
                                         std::size_t n_classes, std::size_t min_samples_leaf = 1);

class DecisionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // rows with value <= threshold go left
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t leaf = 0;     // offset / n_classes into leaf_counts
    double weight = 0.0;        // weighted rows reaching the node
    double impurity = 0.0;      // gini at the node
    bool is_leaf() const { return feature < 0; }
    bool operator==(const Node&) const = default;
  };

  DecisionTree() = default;
  DecisionTree(std::size_t n_classes, std::vector<Node> nodes, std::vector<double> leaf_counts);

  std::size_t n_classes() const { return n_classes_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  // Weighted class counts of the leaf a row falls into.
  std::span<const double> leaf_counts_for(std::span<const double> row) const;
  std::span<const double> leaf_counts(const Node& leaf) const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::size_t n_classes_ = 0;
  std::vector<Node> nodes_;
  std::vector<double> leaf_counts_;
};

struct ForestModel {
  ForestParams params;
  std::size_t n_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<double> class_weights;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;

  std::size_t feature_count() const { return feature_names.size(); }

  // Mean over trees of each leaf's normalised weighted class counts.
  // Throws std::invalid_argument on a row of the wrong length.
  std::vector<double> predict_proba(std::span<const double> row) const;

  bool operator==(const ForestModel&) const = default;
};

// Tree i is grown from seed + i. With bootstrap, each tree sees
// floor(max_samples * N) rows drawn with replacement; at every node
// max_features candidate features are drawn without replacement.
// Throws DataError on fewer than 2 * min_samples_leaf rows, fewer than two
// classes present, or mismatched inputs.
ForestModel fit_forest(const FeatureMatrix& x, std::span<const std::size_t> labels,
                       std::size_t n_classes, const ForestParams& params, std::uint64_t seed,
                       std::vector<std::string> feature_names = {}, std::size_t threads = 1);

ClassProbabilities predict_proba_forest(const ForestModel& model, std::span<const double> row);

struct FeatureGroup {
  std::string name;
  std::vector<std::size_t> features;
};

struct ImportanceReport {
  std::vector<std::string> feature_names;
  std::vector<double> importance;  // sums to 1 unless no tree ever split
  std::vector<std::pair<std::string, double>> groups;

  double group(const std::string& name) const;
};

// Mean decrease in impurity. Throws std::invalid_argument for overlapping
// groups or out-of-range feature indices.
ImportanceReport feature_importance(const ForestModel& model, const std::vector<FeatureGroup>& groups = {});

nlohmann::json to_json(const ForestModel& model);
ForestModel forest_from_json(const nlohmann::json& j);

}  // namespace roadcond
