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

#include "roadcond/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "roadcond/error.hpp"
#include "roadcond/parallel.hpp"

namespace roadcond {

using nlohmann::json;

void FeatureMatrix::push_row(std::span<const double> values) {
  if (values.size() != cols_) throw std::invalid_argument("feature row has the wrong length");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

std::vector<double> balanced_weights(std::span<const std::size_t> labels, std::size_t n_classes) {
  if (labels.empty()) throw std::invalid_argument("balanced_weights of an empty label list");
  std::vector<double> counts(n_classes, 0.0);
  for (std::size_t l : labels) counts.at(l) += 1.0;
  const auto present = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }));
  const auto n = static_cast<double>(labels.size());
  std::vector<double> w(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (counts[c] > 0.0) w[c] = n / (present * counts[c]);
  }
  return w;
}

std::array<double, kNumSurfaceClasses> balanced_weights(std::span<const SurfaceClass> labels) {
  std::vector<std::size_t> idx;
  idx.reserve(labels.size());
  for (SurfaceClass c : labels) idx.push_back(index_of(c));
  const auto w = balanced_weights(idx, kNumSurfaceClasses);
  std::array<double, kNumSurfaceClasses> out{};
  std::copy(w.begin(), w.end(), out.begin());
  return out;
}

double gini(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total <= 0.0) return 0.0;
  double sq = 0.0;
  for (double c : counts) sq += (c / total) * (c / total);
  return 1.0 - sq;
}

namespace {

struct SortedEntry {
  double value;
  std::size_t row;
};

// Workspace reused across nodes of one tree.
struct SplitScratch {
  std::vector<SortedEntry> entries;
  std::vector<double> left;
  std::vector<double> right;
};

std::optional<SplitCandidate> search_split(const FeatureMatrix& x, std::span<const std::size_t> labels,
                                           std::span<const double> row_weights,
                                           std::span<const std::size_t> rows,
                                           std::span<const std::size_t> features, std::size_t n_classes,
                                           std::size_t min_samples_leaf, SplitScratch& s) {
  if (rows.size() < 2 || rows.size() < 2 * min_samples_leaf) return std::nullopt;
  std::vector<double> parent(n_classes, 0.0);
  for (std::size_t r : rows) parent[labels[r]] += row_weights[r];
  double total = 0.0;
  for (double c : parent) total += c;
  if (total <= 0.0) return std::nullopt;
  const double parent_gini = gini(parent);
  if (parent_gini <= kSplitTieEpsilon) return std::nullopt;

  std::optional<SplitCandidate> best;
  s.entries.resize(rows.size());
  s.left.resize(n_classes);
  s.right.resize(n_classes);
  for (std::size_t f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) s.entries[i] = {x(rows[i], f), rows[i]};
    std::sort(s.entries.begin(), s.entries.end(), [](const SortedEntry& a, const SortedEntry& b) {
      return a.value < b.value || (a.value == b.value && a.row < b.row);
    });
    if (s.entries.front().value == s.entries.back().value) continue;
    std::fill(s.left.begin(), s.left.end(), 0.0);
    double left_weight = 0.0;
    for (std::size_t i = 0; i + 1 < s.entries.size(); ++i) {
      const std::size_t r = s.entries[i].row;
      s.left[labels[r]] += row_weights[r];
      left_weight += row_weights[r];
      const double a = s.entries[i].value;
      const double b = s.entries[i + 1].value;
      if (a == b) continue;
      const std::size_t n_left = i + 1;
      const std::size_t n_right = s.entries.size() - n_left;
      if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;
      const double right_weight = total - left_weight;
      if (left_weight <= 0.0 || right_weight <= 0.0) continue;
      for (std::size_t c = 0; c < n_classes; ++c) s.right[c] = parent[c] - s.left[c];
      const double decrease =
          parent_gini - (left_weight / total) * gini(s.left) - (right_weight / total) * gini(s.right);
      if (decrease <= kSplitTieEpsilon) continue;
      if (!best || decrease > best->decrease + kSplitTieEpsilon) {
        double threshold = (a + b) / 2.0;
        if (!std::isfinite(threshold)) threshold = a + (b - a) / 2.0;
        if (!(threshold < b)) threshold = a;
        best = SplitCandidate{f, threshold, decrease};
      }
    }
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const std::size_t> labels, std::span<const double> weights,
              std::size_t n_classes, const ForestParams& params, std::uint64_t seed)
      : x_(x), labels_(labels), weights_(weights), n_classes_(n_classes), params_(params), rng_(seed) {
    all_features_.resize(x.cols());
    std::iota(all_features_.begin(), all_features_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    grow(rows, 0);
    return DecisionTree(n_classes_, std::move(nodes_), std::move(leaf_counts_));
  }

 private:
  std::uint32_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    std::vector<double> counts(n_classes_, 0.0);
    double weight = 0.0;
    for (std::size_t r : rows) {
      counts[labels_[r]] += weights_[r];
      weight += weights_[r];
    }
    nodes_[id].weight = weight;
    nodes_[id].impurity = gini(counts);

    std::optional<SplitCandidate> split;
    const bool depth_left = !params_.max_depth || depth < *params_.max_depth;
    if (depth_left && rows.size() >= 2 * params_.min_samples_leaf) {
      draw_features();
      split = search_split(x_, labels_, weights_, rows, candidates_, n_classes_,
                           params_.min_samples_leaf, scratch_);
    }
    if (!split) {
      nodes_[id].feature = -1;
      nodes_[id].leaf = static_cast<std::uint32_t>(leaf_counts_.size() / n_classes_);
      leaf_counts_.insert(leaf_counts_.end(), counts.begin(), counts.end());
      return id;
    }
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (x_(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[id].feature = static_cast<std::int32_t>(split->feature);
    nodes_[id].threshold = split->threshold;
    const std::uint32_t left = grow(left_rows, depth + 1);
    const std::uint32_t right = grow(right_rows, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void draw_features() {
    const std::size_t m = std::min(params_.max_features, all_features_.size());
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all_features_.size() - 1);
      std::swap(all_features_[i], all_features_[pick(rng_)]);
    }
    candidates_.assign(all_features_.begin(), all_features_.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(candidates_.begin(), candidates_.end());
  }

  const FeatureMatrix& x_;
  std::span<const std::size_t> labels_;
  std::span<const double> weights_;
  std::size_t n_classes_;
  const ForestParams& params_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> all_features_;
  std::vector<std::size_t> candidates_;
  SplitScratch scratch_;
  std::vector<DecisionTree::Node> nodes_;
  std::vector<double> leaf_counts_;
};

}  // namespace

std::optional<SplitCandidate> best_split(const FeatureMatrix& x, std::span<const std::size_t> labels,
                                         std::span<const double> row_weights,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> features, std::size_t n_classes,
                                         std::size_t min_samples_leaf) {
  std::vector<std::size_t> sorted(features.begin(), features.end());
  std::sort(sorted.begin(), sorted.end());
  SplitScratch scratch;
  return search_split(x, labels, row_weights, rows, sorted, n_classes, min_samples_leaf, scratch);
}

DecisionTree::DecisionTree(std::size_t n_classes, std::vector<Node> nodes, std::vector<double> leaf_counts)
    : n_classes_(n_classes), nodes_(std::move(nodes)), leaf_counts_(std::move(leaf_counts)) {
  if (nodes_.empty()) throw std::invalid_argument("decision tree without nodes");
  for (const Node& n : nodes_) {
    if (n.is_leaf()) {
      if ((static_cast<std::size_t>(n.leaf) + 1) * n_classes_ > leaf_counts_.size()) {
        throw std::invalid_argument("leaf offset out of range");
      }
    } else if (n.left >= nodes_.size() || n.right >= nodes_.size()) {
      throw std::invalid_argument("child index out of range");
    }
  }
}

std::span<const double> DecisionTree::leaf_counts(const Node& leaf) const {
  return {leaf_counts_.data() + static_cast<std::size_t>(leaf.leaf) * n_classes_, n_classes_};
}

std::span<const double> DecisionTree::leaf_counts_for(std::span<const double> row) const {
  const Node* n = &nodes_.front();
  while (!n->is_leaf()) {
    n = &nodes_[row[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right];
  }
  return leaf_counts(*n);
}

std::vector<double> ForestModel::predict_proba(std::span<const double> row) const {
  if (row.size() != feature_count()) {
    throw std::invalid_argument("expected " + std::to_string(feature_count()) + " features, got " +
                                std::to_string(row.size()));
  }
  std::vector<double> out(n_classes, 0.0);
  for (const auto& tree : trees) {
    const auto counts = tree.leaf_counts_for(row);
    double total = 0.0;
    for (double c : counts) total += c;
    for (std::size_t k = 0; k < n_classes; ++k) out[k] += counts[k] / total;
  }
  double sum = 0.0;
  for (double& v : out) {
    v /= static_cast<double>(trees.size());
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

ForestModel fit_forest(const FeatureMatrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                       const ForestParams& params, std::uint64_t seed,
                       std::vector<std::string> feature_names, std::size_t threads) {
  params.validate();
  if (labels.size() != x.rows()) throw DataError("label count does not match feature rows");
  if (x.cols() == 0) throw DataError("forest needs at least one feature");
  if (x.rows() < 2 * params.min_samples_leaf || x.rows() < 2) {
    throw DataError("forest needs at least " + std::to_string(2 * params.min_samples_leaf) + " rows");
  }
  std::set<std::size_t> present;
  for (std::size_t l : labels) {
    if (l >= n_classes) throw DataError("label index out of range");
    present.insert(l);
  }
  if (present.size() < 2) throw DataError("forest needs at least two classes in the training data");
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < x.cols(); ++c) feature_names.push_back("f" + std::to_string(c));
  }
  if (feature_names.size() != x.cols()) throw DataError("feature name count does not match columns");

  ForestModel model;
  model.params = params;
  model.n_classes = n_classes;
  model.feature_names = std::move(feature_names);
  model.seed = seed;
  model.class_weights = params.balanced_class_weights ? balanced_weights(labels, n_classes)
                                                      : std::vector<double>(n_classes, 1.0);
  model.trees.resize(params.n_estimators);

  const std::size_t n = x.rows();
  parallel_for(params.n_estimators, threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = seed + t;
    std::vector<double> multiplicity(n, 0.0);
    std::mt19937_64 rng(tree_seed ^ 0xA5A5A5A5DEADBEEFULL);
    if (params.bootstrap) {
      const auto draws = std::max<std::size_t>(1, static_cast<std::size_t>(params.max_samples * static_cast<double>(n)));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t d = 0; d < draws; ++d) multiplicity[pick(rng)] += 1.0;
    } else {
      std::fill(multiplicity.begin(), multiplicity.end(), 1.0);
    }
    std::vector<double> weights(n, 0.0);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < n; ++r) {
      weights[r] = multiplicity[r] * model.class_weights[labels[r]];
      if (weights[r] > 0.0) rows.push_back(r);
    }
    TreeBuilder builder(x, labels, weights, n_classes, params, tree_seed);
    model.trees[t] = builder.build(std::move(rows));
  });
  return model;
}

ClassProbabilities predict_proba_forest(const ForestModel& model, std::span<const double> row) {
  if (model.n_classes != kNumSurfaceClasses) {
    throw std::invalid_argument("forest is not a surface-condition model");
  }
  return ClassProbabilities::normalized(model.predict_proba(row));
}

double ImportanceReport::group(const std::string& name) const {
  for (const auto& [g, v] : groups) {
    if (g == name) return v;
  }
  throw std::out_of_range("no importance group named " + name);
}

ImportanceReport feature_importance(const ForestModel& model, const std::vector<FeatureGroup>& groups) {
  ImportanceReport report;
  report.feature_names = model.feature_names;
  report.importance.assign(model.feature_count(), 0.0);
  for (const auto& tree : model.trees) {
    const auto& nodes = tree.nodes();
    const double root_weight = nodes.front().weight;
    if (root_weight <= 0.0) continue;
    for (const auto& node : nodes) {
      if (node.is_leaf()) continue;
      const auto& l = nodes[node.left];
      const auto& r = nodes[node.right];
      const double gain = node.weight * node.impurity - l.weight * l.impurity - r.weight * r.impurity;
      report.importance[static_cast<std::size_t>(node.feature)] += std::max(0.0, gain) / root_weight;
    }
  }
  const double total = std::accumulate(report.importance.begin(), report.importance.end(), 0.0);
  if (total > 0.0) {
    for (double& v : report.importance) v /= total;
  }
  std::vector<bool> used(model.feature_count(), false);
  for (const auto& g : groups) {
    double sum = 0.0;
    for (std::size_t f : g.features) {
      if (f >= used.size()) throw std::invalid_argument("importance group feature out of range");
      if (used[f]) throw std::invalid_argument("importance groups overlap on feature " + std::to_string(f));
      used[f] = true;
      sum += report.importance[f];
    }
    report.groups.emplace_back(g.name, sum);
  }
  return report;
}

json to_json(const ForestModel& model) {
  json trees = json::array();
  for (const auto& tree : model.trees) {
    std::vector<std::int32_t> feature;
    std::vector<double> threshold, weight, impurity;
    std::vector<std::uint32_t> left, right, leaf;
    for (const auto& n : tree.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      leaf.push_back(n.leaf);
      weight.push_back(n.weight);
      impurity.push_back(n.impurity);
    }
    std::vector<double> counts;
    for (const auto& n : tree.nodes()) {
      if (n.is_leaf()) {
        auto c = tree.leaf_counts(n);
        counts.insert(counts.end(), c.begin(), c.end());
      }
    }
    trees.push_back(json{{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                         {"leaf", leaf}, {"weight", weight}, {"impurity", impurity}, {"leaf_counts", counts}});
  }
  return json{{"format", "roadcond.forest"},
              {"version", 1},
              {"params", to_json(model.params)},
              {"n_classes", model.n_classes},
              {"feature_names", model.feature_names},
              {"class_weights", model.class_weights},
              {"seed", model.seed},
              {"trees", trees}};
}

ForestModel forest_from_json(const json& j) {
  if (j.at("format") != "roadcond.forest" || j.at("version") != 1) {
    throw DataError("unsupported forest record");
  }
  ForestModel m;
  m.params = forest_params_from_json(j.at("params"));
  m.n_classes = j.at("n_classes").get<std::size_t>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.class_weights = j.at("class_weights").get<std::vector<double>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<std::uint32_t>>();
    const auto right = t.at("right").get<std::vector<std::uint32_t>>();
    const auto leaf = t.at("leaf").get<std::vector<std::uint32_t>>();
    const auto weight = t.at("weight").get<std::vector<double>>();
    const auto impurity = t.at("impurity").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || leaf.size() != n ||
        weight.size() != n || impurity.size() != n) {
      throw DataError("forest record has inconsistent node arrays");
    }
    std::vector<DecisionTree::Node> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i] = {feature[i], threshold[i], left[i], right[i], leaf[i], weight[i], impurity[i]};
      if (feature[i] >= 0 && static_cast<std::size_t>(feature[i]) >= m.feature_names.size()) {
        throw DataError("forest record references an unknown feature");
      }
    }
    try {
      m.trees.emplace_back(m.n_classes, std::move(nodes), t.at("leaf_counts").get<std::vector<double>>());
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("malformed tree: ") + e.what());
    }
  }
  if (m.trees.empty()) throw DataError("forest record has no trees");
  return m;
}

}  // namespace roadcond
