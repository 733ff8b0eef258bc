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

#include "roadcond/bundle.hpp"
#include "roadcond/error.hpp"
#include "roadcond/stage1.hpp"
#include "support/synthetic_fixture.hpp"

namespace roadcond {
namespace {

struct Stage1Data {
  FeatureMatrix train{kImageFeatureCount}, valid{kImageFeatureCount};
  std::vector<std::size_t> train_y, valid_y;
  Manifest manifest;
};

Stage1Data small_synthetic() {
  SynthSpec spec;
  spec.n_sites = 5;
  spec.observations_per_site = 100;
  spec.seed = 3;
  const auto d = testing::make_synthetic(spec);
  Stage1Data out;
  out.manifest = d.manifest;
  for (std::size_t i = 0; i < d.manifest.size(); ++i) {
    const auto& o = d.manifest[i];
    const bool valid = o.site_id == "site-04";
    (valid ? out.valid : out.train).push_row(d.features->get(o.id));
    (valid ? out.valid_y : out.train_y).push_back(index_of(std::get<SurfaceClass>(o.label)));
  }
  return out;
}

ForestParams quick_params() {
  ForestParams p = default_baseline_params();
  p.n_estimators = 20;
  return p;
}

TEST(Stage1Builtin, BeatsChanceOnUnseenSite) {
  const Stage1Data d = small_synthetic();
  ASSERT_EQ(d.train.rows() + d.valid.rows(), 500u);
  const auto model = train_baseline(d.train, d.train_y, 5, quick_params(), 1);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < d.valid.rows(); ++r) {
    const auto p = predict_stage1_raw(model, Observation{}, d.valid.row(r));
    const auto arg = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += arg == d.valid_y[r];
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(d.valid.rows()), 0.2);
}

TEST(Stage1Builtin, AbsentClassPredictedZeroWithWarning) {
  const Stage1Data d = small_synthetic();
  FeatureMatrix x(kImageFeatureCount);
  std::vector<std::size_t> y;
  for (std::size_t r = 0; r < d.train.rows(); ++r) {
    if (d.train_y[r] == index_of(SurfaceClass::kPoorVisibility)) continue;
    x.push_row(d.train.row(r));
    y.push_back(d.train_y[r]);
  }
  const auto model = train_baseline(x, y, 5, quick_params(), 1);
  ASSERT_EQ(model.warnings.size(), 1u);
  for (std::size_t r = 0; r < d.valid.rows(); ++r) {
    EXPECT_EQ(predict_stage1_raw(model, Observation{}, d.valid.row(r))[4], 0.0);
  }
}

TEST(Stage1Builtin, DeterministicModelBytes) {
  const Stage1Data d = small_synthetic();
  const auto a = train_baseline(d.train, d.train_y, 5, quick_params(), 9);
  const auto b = train_baseline(d.train, d.train_y, 5, quick_params(), 9);
  EXPECT_EQ(nlohmann::json::to_cbor(to_json(a)), nlohmann::json::to_cbor(to_json(b)));
  EXPECT_EQ(stage1_from_json(to_json(a)), a);
}

TEST(Stage1Builtin, ProbabilitiesSumToOne) {
  const Stage1Data d = small_synthetic();
  const auto model = train_baseline(d.train, d.train_y, 5, quick_params(), 2);
  for (std::size_t r = 0; r < d.train.rows(); r += 7) {
    const auto p = predict_stage1(model, Observation{}, d.train.row(r));
    EXPECT_NEAR(std::accumulate(p.values().begin(), p.values().end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Stage1Builtin, SingleClassRejected) {
  FeatureMatrix x(2);
  for (int i = 0; i < 20; ++i) x.push_row(std::vector<double>{1.0 * i, 0.0});
  const std::vector<std::size_t> y(20, 1);
  EXPECT_THROW(train_baseline(x, y, 5, quick_params(), 1), DataError);
}

TEST(Stage1External, PassesAttachedProbabilities) {
  Observation o;
  o.id = "x";
  o.stage1_probs = ClassProbabilities({0.7, 0.1, 0.1, 0.05, 0.05});
  const auto p = predict_stage1_raw(external_stage1_model(), o, {});
  EXPECT_EQ(p, (std::vector<double>{0.7, 0.1, 0.1, 0.05, 0.05}));
}

TEST(Stage1External, MissingProbabilitiesNameTheId) {
  Observation o;
  o.id = "cam9_0001";
  try {
    predict_stage1_raw(external_stage1_model(), o, {});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("cam9_0001"), std::string::npos);
  }
}

}  // namespace
}  // namespace roadcond
