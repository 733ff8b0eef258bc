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


#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <vector>

#include "oracles/split_oracle.hpp"
#include "roadcond/error.hpp"
#include "roadcond/forest.hpp"

namespace roadcond {
namespace {

ForestParams single_tree(std::size_t depth, std::size_t max_features) {
  ForestParams p;
  p.n_estimators = 1;
  p.max_depth = depth;
  p.max_features = max_features;
  p.min_samples_leaf = 1;
  p.bootstrap = false;
  p.balanced_class_weights = false;
  return p;
}

TEST(BalancedWeights, NinetyTen) {
  const std::vector<std::size_t> labels = [] {
    std::vector<std::size_t> l(90, 0);
    l.insert(l.end(), 10, 1);
    return l;
  }();
  const auto w = balanced_weights(labels, 2);
  EXPECT_NEAR(w[0], 100.0 / 180.0, 1e-12);
  EXPECT_NEAR(w[1], 5.0, 1e-12);
}

TEST(BalancedWeights, EqualCountsGiveOnes) {
  const std::vector<std::size_t> labels{0, 1, 2, 3, 4, 4, 3, 2, 1, 0};
  for (double w : balanced_weights(labels, 5)) EXPECT_DOUBLE_EQ(w, 1.0);
}

TEST(BalancedWeights, ClassTableCounts) {
  const std::array<std::size_t, 5> counts{1527, 2989, 8458, 7600, 915};
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < 5; ++c) labels.insert(labels.end(), counts[c], c);
  ASSERT_EQ(labels.size(), 21489u);
  const auto w = balanced_weights(labels, 5);
  EXPECT_NEAR(w[2], 21489.0 / (5.0 * 8458.0), 1e-12);
  EXPECT_NEAR(w[2], 0.508, 5e-4);
}

TEST(Gini, KnownValues) {
  EXPECT_DOUBLE_EQ(gini(std::vector<double>{5, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gini(std::vector<double>{1, 1}), 0.5);
}

TEST(BestSplit, PureNodeHasNoSplit) {
  FeatureMatrix x(1);
  for (double v : {1.0, 2.0, 3.0}) x.push_row(std::vector<double>{v});
  const std::vector<std::size_t> labels{0, 0, 0}, rows{0, 1, 2}, feats{0};
  const std::vector<double> w(3, 1.0);
  EXPECT_FALSE(best_split(x, labels, w, rows, feats, 2).has_value());
}

TEST(BestSplit, FourPointsSplitAtMidpoint) {
  FeatureMatrix x(1);
  for (double v : {1.0, 2.0, 3.0, 4.0}) x.push_row(std::vector<double>{v});
  const std::vector<std::size_t> labels{0, 0, 1, 1}, rows{0, 1, 2, 3}, feats{0};
  const std::vector<double> w(4, 1.0);
  const auto s = best_split(x, labels, w, rows, feats, 2);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->feature, 0u);
  EXPECT_DOUBLE_EQ(s->threshold, 2.5);
  EXPECT_DOUBLE_EQ(s->decrease, 0.5);
}

TEST(BestSplit, TiedFeaturesPreferLowerIndex) {
  FeatureMatrix x(2);
  for (double v : {1.0, 2.0, 3.0, 4.0}) x.push_row(std::vector<double>{v, v * 10});
  const std::vector<std::size_t> labels{0, 0, 1, 1}, rows{0, 1, 2, 3}, feats{1, 0};
  const std::vector<double> w(4, 1.0);
  const auto s = best_split(x, labels, w, rows, feats, 2);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->feature, 0u);
}

TEST(BestSplit, MinLeafRespected) {
  FeatureMatrix x(1);
  for (double v : {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}) x.push_row(std::vector<double>{v});
  const std::vector<std::size_t> labels{0, 1, 1, 1, 1, 1}, rows{0, 1, 2, 3, 4, 5}, feats{0};
  const std::vector<double> w(6, 1.0);
  const auto s = best_split(x, labels, w, rows, feats, 2, 2);
  ASSERT_TRUE(s.has_value());
  EXPECT_DOUBLE_EQ(s->threshold, 2.5);
}

TEST(BestSplit, AgreesWithExhaustiveSearch) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 11, d = 1 + rng() % 3, k = 2 + rng() % 2;
    FeatureMatrix x(d);
    std::vector<std::vector<double>> rows_v;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> r(d);
      for (double& v : r) v = static_cast<double>(rng() % 6);
      x.push_row(r);
      rows_v.push_back(r);
      labels[i] = rng() % k;
    }
    const std::vector<double> w(n, 1.0);
    std::vector<std::size_t> rows(n), feats(d);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(feats.begin(), feats.end(), 0);
    const auto got = best_split(x, labels, w, rows, feats, k);
    const auto want = oracle::exhaustive_split(rows_v, labels, w, k, 1, kSplitTieEpsilon);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (!got) continue;
    EXPECT_EQ(got->feature, want->feature);
    EXPECT_DOUBLE_EQ(got->threshold, (want->left_max + want->right_min) / 2);
    EXPECT_NEAR(got->decrease, want->decrease, 1e-12);
  }
}

TEST(Forest, SeparableDataFitsExactly) {
  FeatureMatrix x(2);
  std::vector<std::size_t> labels;
  for (int i = 0; i < 40; ++i) {
    const double a = i % 2 ? 0.8 : 0.2;
    x.push_row(std::vector<double>{a, static_cast<double>(i)});
    labels.push_back(i % 2);
  }
  const auto model = fit_forest(x, labels, 2, single_tree(2, 2), 3);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto p = model.predict_proba(x.row(r));
    EXPECT_DOUBLE_EQ(p[labels[r]], 1.0);
  }
}

TEST(Forest, SameSeedSamePredictions) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  FeatureMatrix x(4);
  std::vector<std::size_t> labels;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> r(4);
    for (double& v : r) v = u(rng);
    labels.push_back(r[0] + r[1] > 1.0 ? 1 : (r[2] > 0.7 ? 2 : 0));
    x.push_row(r);
  }
  ForestParams p;
  p.n_estimators = 20;
  const auto a = fit_forest(x, labels, 3, p, 77);
  const auto b = fit_forest(x, labels, 3, p, 77);
  EXPECT_EQ(a, b);
  const auto c = fit_forest(x, labels, 3, p, 77, {}, 3);
  EXPECT_EQ(a, c);
  for (std::size_t r = 0; r < 20; ++r) EXPECT_EQ(a.predict_proba(x.row(r)), b.predict_proba(x.row(r)));
}

TEST(Forest, PureLeafGivesCertainty) {
  FeatureMatrix x(1);
  for (int i = 0; i < 6; ++i) x.push_row(std::vector<double>{static_cast<double>(i)});
  const std::vector<std::size_t> labels{0, 0, 0, 1, 1, 1};
  const auto model = fit_forest(x, labels, 5, single_tree(3, 1), 1);
  const auto p = model.predict_proba(std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(p[0], 1.0);
}

TEST(Forest, TreesAreAveraged) {
  ForestModel m;
  m.n_classes = 5;
  m.feature_names = {"f"};
  DecisionTree::Node leaf;
  leaf.feature = -1;
  m.trees.emplace_back(5, std::vector<DecisionTree::Node>{leaf}, std::vector<double>{1, 0, 0, 0, 0});
  m.trees.emplace_back(5, std::vector<DecisionTree::Node>{leaf}, std::vector<double>{0, 1, 0, 0, 0});
  const auto p = m.predict_proba(std::vector<double>{0.0});
  EXPECT_EQ(p, (std::vector<double>{0.5, 0.5, 0, 0, 0}));
}

TEST(Forest, OutputsSumToOne) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  FeatureMatrix x(3);
  std::vector<std::size_t> labels;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> r(3);
    for (double& v : r) v = u(rng);
    x.push_row(r);
    labels.push_back(rng() % 5);
  }
  ForestParams p;
  p.n_estimators = 15;
  const auto model = fit_forest(x, labels, 5, p, 1);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> r{u(rng), u(rng), u(rng)};
    const auto prob = model.predict_proba(r);
    EXPECT_NEAR(std::accumulate(prob.begin(), prob.end(), 0.0), 1.0, 1e-9);
  }
  EXPECT_THROW(model.predict_proba(std::vector<double>{0.1}), std::invalid_argument);
}

TEST(Importance, SingleSplitFeatureTakesAll) {
  FeatureMatrix x(5);
  std::vector<std::size_t> labels;
  for (int i = 0; i < 20; ++i) {
    x.push_row(std::vector<double>{0, 0, 0, static_cast<double>(i), 0});
    labels.push_back(i < 10 ? 0 : 1);
  }
  const auto model = fit_forest(x, labels, 2, single_tree(1, 5), 2);
  const auto imp = feature_importance(model).importance;
  for (std::size_t f = 0; f < 5; ++f) EXPECT_DOUBLE_EQ(imp[f], f == 3 ? 1.0 : 0.0);
}

struct ElevenColumnProblem {
  FeatureMatrix x{11};
  std::vector<std::size_t> labels;
  explicit ElevenColumnProblem(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> noise(0, 1);
    for (int i = 0; i < 600; ++i) {
      const std::size_t y = rng() % 5;
      std::vector<double> r(11);
      for (std::size_t c = 0; c < 5; ++c) r[c] = (c == y ? 0.6 : 0.1) + 0.1 * u(rng);
      for (std::size_t c = 5; c < 11; ++c) r[c] = noise(rng);
      x.push_row(r);
      labels.push_back(y);
    }
  }
};

TEST(Importance, GroupsPartitionTheTotal) {
  ElevenColumnProblem prob(3);
  ForestParams p;
  p.n_estimators = 30;
  const auto model = fit_forest(prob.x, prob.labels, 5, p, 5);
  const auto rep = feature_importance(model, {{"image", {0, 1, 2, 3, 4}}, {"weather", {5, 6, 7, 8, 9, 10}}});
  EXPECT_NEAR(rep.group("image") + rep.group("weather"), 1.0, 1e-12);
}

TEST(Importance, NoiseWeatherRanksBelowInformativeImage) {
  ElevenColumnProblem prob(4);
  ForestParams p;
  p.n_estimators = 30;
  const auto model = fit_forest(prob.x, prob.labels, 5, p, 6);
  const auto rep = feature_importance(model, {{"image", {0, 1, 2, 3, 4}}, {"weather", {5, 6, 7, 8, 9, 10}}});
  EXPECT_LT(rep.group("weather"), rep.group("image"));
}

TEST(Importance, OverlappingGroupsRejected) {
  ElevenColumnProblem prob(5);
  ForestParams p;
  p.n_estimators = 2;
  const auto model = fit_forest(prob.x, prob.labels, 5, p, 6);
  EXPECT_THROW(feature_importance(model, {{"a", {0, 1}}, {"b", {1, 2}}}), std::invalid_argument);
}

TEST(Forest, JsonRoundTrip) {
  ElevenColumnProblem prob(6);
  ForestParams p;
  p.n_estimators = 3;
  const auto model = fit_forest(prob.x, prob.labels, 5, p, 8);
  EXPECT_EQ(forest_from_json(to_json(model)), model);
}

TEST(Forest, LabelRowMismatchRejected) {
  FeatureMatrix x(1);
  for (int i = 0; i < 20; ++i) x.push_row(std::vector<double>{static_cast<double>(i)});
  const std::vector<std::size_t> labels(19, 0);
  EXPECT_THROW(fit_forest(x, labels, 2, ForestParams{}, 1), DataError);
}

}  // namespace
}  // namespace roadcond
