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

#include <random>

#include "roadcond/metrics.hpp"

namespace roadcond {
namespace {

constexpr std::size_t SS = 0, SN = 1, WE = 2, DR = 3, PV = 4;

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  const std::vector<std::size_t> y{0, 1, 2, 3, 4, 2};
  const auto cm = confusion(y, y);
  EXPECT_EQ(cm.correct(), cm.total());
  EXPECT_EQ(cm(WE, WE), 2u);
}

TEST(Confusion, ConstantPredictorFillsOneColumn) {
  const std::vector<std::size_t> y{0, 1, 2, 3, 4}, p(5, DR);
  const auto cm = confusion(y, p);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(cm(t, DR), 1u);
  EXPECT_EQ(cm.total(), 5u);
}

TEST(Confusion, MassConserved) {
  const std::vector<std::size_t> y{0, 1, 2}, p{2, 1, 0};
  EXPECT_EQ(confusion(y, p).total(), 3u);
  EXPECT_THROW(confusion(y, std::vector<std::size_t>{1, 2}), std::invalid_argument);
}

TEST(Recall, PerfectAndPartial) {
  ConfusionMatrix cm;
  for (std::size_t c = 0; c < 5; ++c) cm.add(c, c, 3);
  for (const auto& r : recall_per_class(cm)) EXPECT_DOUBLE_EQ(*r, 1.0);
  ConfusionMatrix snow;
  snow.add(SN, SN, 8);
  snow.add(SN, SS, 2);
  EXPECT_DOUBLE_EQ(*recall_per_class(snow)[SN], 0.8);
  EXPECT_FALSE(recall_per_class(snow)[WE].has_value());
}

TEST(AverageRecall, ClassTableColumnMean) {
  ConfusionMatrix cm;
  const std::array<std::size_t, 5> hits{815, 771, 759, 901, 768};
  for (std::size_t c = 0; c < 5; ++c) {
    cm.add(c, c, hits[c]);
    cm.add(c, (c + 1) % 5, 1000 - hits[c]);
  }
  EXPECT_NEAR(average_recall(cm), 0.8028, 1e-4);
}

TEST(AverageRecall, EqualRecallsAndUndefinedRows) {
  ConfusionMatrix cm;
  for (std::size_t c = 0; c < 5; ++c) {
    cm.add(c, c, 3);
    cm.add(c, (c + 2) % 5, 1);
  }
  EXPECT_DOUBLE_EQ(average_recall(cm), 0.75);
  ConfusionMatrix two;
  two.add(SS, SS, 4);
  two.add(DR, WE, 4);
  EXPECT_DOUBLE_EQ(average_recall(two), 0.5);
  EXPECT_THROW(average_recall(ConfusionMatrix{}), std::invalid_argument);
}

TEST(AdjacentErrors, AllAdjacent) {
  ConfusionMatrix cm;
  cm.add(SN, SS, 4);
  EXPECT_DOUBLE_EQ(*adjacent_error_fraction(cm, AdjacencyMap::surface_default()), 1.0);
}

TEST(AdjacentErrors, NoneAdjacent) {
  ConfusionMatrix cm;
  cm.add(DR, SS, 4);
  EXPECT_DOUBLE_EQ(*adjacent_error_fraction(cm, AdjacencyMap::surface_default()), 0.0);
}

TEST(AdjacentErrors, Mixed) {
  ConfusionMatrix cm;
  cm.add(SN, SS, 1);
  cm.add(WE, DR, 1);
  cm.add(PV, WE, 1);
  cm.add(DR, SN, 1);
  cm.add(DR, DR, 10);
  EXPECT_DOUBLE_EQ(*adjacent_error_fraction(cm, AdjacencyMap::surface_default()), 0.75);
  ConfusionMatrix perfect;
  perfect.add(DR, DR, 2);
  EXPECT_FALSE(adjacent_error_fraction(perfect, AdjacencyMap::surface_default()).has_value());
}

TEST(SelectModel, RecallGateThenAccuracy) {
  const std::vector<SelectionCandidate> c{{"A", 0.80, 0.85}, {"B", 0.795, 0.88}, {"C", 0.70, 0.95}};
  EXPECT_EQ(select_model(c, 0.01), "B");
}

TEST(SelectModel, SingleCandidateAndZeroTau) {
  const std::vector<SelectionCandidate> one{{"only", 0.1, 0.2}};
  EXPECT_EQ(select_model(one), "only");
  const std::vector<SelectionCandidate> c{{"A", 0.80, 0.85}, {"B", 0.795, 0.88}, {"C", 0.70, 0.95}};
  EXPECT_EQ(select_model(c, 0.0), "A");
  EXPECT_THROW(select_model(std::vector<SelectionCandidate>{}), std::invalid_argument);
}

TEST(Reliability, PerfectlyCalibratedSamplesHaveSmallEce) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::pair<double, bool>> pairs;
  for (int i = 0; i < 10000; ++i) {
    const double p = u(rng);
    pairs.emplace_back(p, u(rng) < p);
  }
  EXPECT_LT(reliability(pairs).ece, 0.02);
}

TEST(Reliability, DegenerateExtremes) {
  const std::vector<std::pair<double, bool>> right(50, {1.0, true}), wrong(50, {1.0, false});
  EXPECT_DOUBLE_EQ(reliability(right).ece, 0.0);
  EXPECT_DOUBLE_EQ(reliability(wrong).ece, 1.0);
  const auto r = reliability(right);
  ASSERT_EQ(r.bins.size(), 10u);
  EXPECT_EQ(r.bins.back().count, 50u);
}

TEST(Evaluate, StrataAndJsonRoundTrip) {
  std::vector<LabelledPrediction> preds;
  for (std::size_t i = 0; i < 40; ++i) {
    preds.push_back({i % 5, i % 3 == 0 ? (i + 1) % 5 : i % 5, i % 2 ? SiteQuality::kLow : SiteQuality::kHigh});
  }
  const auto adj = AdjacencyMap::surface_default();
  const EvalReport r = evaluate(preds, adj);
  EXPECT_EQ(r.count, 40u);
  EXPECT_EQ(r.stratum_count.at("high") + r.stratum_count.at("low"), 40u);
  const EvalReport back = eval_report_from_json(to_json(r), adj);
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.stratum_accuracy, r.stratum_accuracy);
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_NE(to_text(r, "t").find("accuracy"), std::string::npos);
  EXPECT_NE(to_table_rows(r, "p").find("p,accuracy"), std::string::npos);
}

TEST(Accuracy, EqualsPrevalenceWeightedRecall) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionMatrix cm;
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t p = 0; p < 5; ++p) cm.add(t, p, rng() % 20);
    const auto rec = recall_per_class(cm);
    double weighted = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      if (rec[c]) weighted += static_cast<double>(cm.row_total(c)) / static_cast<double>(cm.total()) * *rec[c];
    }
    EXPECT_NEAR(accuracy(cm), weighted, 1e-12);
  }
}

TEST(PrecisionF1, KnownMatrix) {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 6);
  cm.add(0, 1, 2);
  cm.add(1, 0, 3);
  cm.add(1, 1, 9);
  EXPECT_DOUBLE_EQ(*precision_per_class(cm)[0], 6.0 / 9.0);
  const double p = 6.0 / 9.0, r = 6.0 / 8.0;
  EXPECT_DOUBLE_EQ(*f1_per_class(cm)[0], 2 * p * r / (p + r));
}

}  // namespace
}  // namespace roadcond
