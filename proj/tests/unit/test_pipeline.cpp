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

#include <set>

#include "roadcond/error.hpp"
#include "roadcond/pipeline.hpp"
#include "support/synthetic_fixture.hpp"

namespace roadcond {
namespace {

using testing::trained_fixture;

TEST(NestedCv, MemberAndObservationCounts) {
  const auto& f = trained_fixture();
  const VariantResult& r = f.nested.result;
  const std::size_t n = surface_observations(f.data.manifest).size();
  EXPECT_EQ(r.n_observations, n);
  EXPECT_EQ(r.n_members, 30u);
  EXPECT_EQ(r.ensemble.count, n);
  EXPECT_EQ(r.stage1_ensemble.count, n);
  EXPECT_EQ(r.stage2.count, 5 * n);
  EXPECT_EQ(r.stage1.count, 5 * n);
  EXPECT_EQ(r.folds.size(), 6u);
  EXPECT_EQ(f.nested.bundle.folds.size(), 6u);
  for (const auto& fold : f.nested.bundle.folds) EXPECT_EQ(fold.members.size(), 5u);
}

TEST(NestedCv, GroupImportancesPartitionUnity) {
  const auto& g = trained_fixture().nested.result.group_importance;
  ASSERT_TRUE(g.contains("stage1") && g.contains("weather"));
  EXPECT_NEAR(g.at("stage1") + g.at("weather"), 1.0, 1e-9);
}

TEST(NestedCv, MembersRespectSiteDisjointness) {
  const auto& b = trained_fixture().nested.bundle;
  for (const auto& fold : b.folds) {
    for (const auto& m : fold.members) {
      std::set<std::size_t> roles(m.train1_folds.begin(), m.train1_folds.end());
      roles.insert(m.train2_folds.begin(), m.train2_folds.end());
      roles.insert(m.validation_fold);
      roles.insert(fold.test_fold);
      EXPECT_EQ(roles.size(), 6u);
    }
  }
}

TEST(NestedCv, DeterministicReports) {
  const auto& f = trained_fixture();
  const auto again = run_nested_cv(f.data.manifest, f.config, f.data.features.get());
  EXPECT_EQ(to_json(again.result).dump(), to_json(f.nested.result).dump());
  EXPECT_EQ(encode_bundle(again.bundle), encode_bundle(f.nested.bundle));
}

TEST(NestedCv, ThreadCountDoesNotChangeResults) {
  const auto& f = trained_fixture();
  PipelineConfig c = f.config;
  c.threads = 3;
  const auto threaded = run_nested_cv(f.data.manifest, c, f.data.features.get());
  EXPECT_EQ(to_json(threaded.result).dump(), to_json(f.nested.result).dump());
}

TEST(NestedCv, TooMuchMissingWeatherRejected) {
  const auto& f = trained_fixture();
  Manifest m = f.data.manifest;
  auto& obs = m.mutable_observations();
  for (std::size_t i = 0; i < obs.size(); i += 4) obs[i].weather.reset();
  EXPECT_THROW(run_nested_cv(m, f.config, f.data.features.get()), DataError);
}

TEST(NestedCv, ModestMissingWeatherDegrades) {
  const auto& f = trained_fixture();
  Manifest m = f.data.manifest;
  auto& obs = m.mutable_observations();
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < obs.size(); i += 10) {
    if (is_surface(obs[i].label)) ++dropped;
    obs[i].weather.reset();
  }
  const auto out = run_nested_cv(m, f.config, f.data.features.get());
  EXPECT_EQ(out.result.degraded, dropped);
  EXPECT_EQ(out.result.ensemble.count, surface_observations(m).size());
}

TEST(NestedCv, BuiltinNeedsFeatures) {
  const auto& f = trained_fixture();
  EXPECT_THROW(run_nested_cv(f.data.manifest, f.config, nullptr), std::invalid_argument);
}

TEST(NestedCv, ExternalProbabilitiesPath) {
  const auto& f = trained_fixture();
  Manifest m = surface_observations(f.data.manifest);
  for (auto& o : m.mutable_observations()) {
    std::array<double, 5> p{0.1, 0.1, 0.1, 0.1, 0.1};
    p[index_of(std::get<SurfaceClass>(o.label))] = 0.6;
    o.stage1_probs = ClassProbabilities(p);
  }
  RunOptions opt;
  opt.stage1_kind = Stage1Kind::kExternalProbabilities;
  const auto out = run_nested_cv(m, f.config, nullptr, opt);
  EXPECT_EQ(out.bundle.stage1_kind, Stage1Kind::kExternalProbabilities);
  EXPECT_DOUBLE_EQ(out.result.stage1_ensemble.accuracy, 1.0);
}

TEST(LeakageAudit, DisjointRolesPass) {
  const auto& m = trained_fixture().data.manifest;
  const MemberRoles roles{{0}, {m.size() - 1}, {}, {}};
  EXPECT_NO_THROW(audit_site_leakage(m, roles, false, "t"));
}

TEST(LeakageAudit, SharedSiteRaises) {
  const auto& m = trained_fixture().data.manifest;
  const MemberRoles roles{{0}, {}, {}, {1}};  // both rows come from site-00
  try {
    audit_site_leakage(m, roles, false, "outer 0, inner 0");
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("site-00"), std::string::npos);
  }
}

TEST(LeakageAudit, SharedTrainingOnlyExemptsTrainingPair) {
  const auto& m = trained_fixture().data.manifest;
  EXPECT_NO_THROW(audit_site_leakage(m, {{0}, {1}, {}, {}}, true, "t"));
  EXPECT_THROW(audit_site_leakage(m, {{0}, {1}, {}, {}}, false, "t"), InvariantError);
  EXPECT_THROW(audit_site_leakage(m, {{0}, {}, {1}, {}}, true, "t"), InvariantError);
}

TEST(Inference, WeatherGivesTwoDecisions) {
  const auto& f = trained_fixture();
  const auto& o = f.data.manifest[3];
  ASSERT_TRUE(o.weather.has_value());
  const auto r = infer(f.bundle, o, f.data.features->get(o.id));
  EXPECT_FALSE(r.surface.degraded);
  EXPECT_TRUE(r.obstruction.has_value());
  EXPECT_EQ(r.surface.decision.members.size(), 5u);
  EXPECT_EQ(r.id, o.id);
}

TEST(Inference, MissingWeatherDegradesWithFlag) {
  const auto& f = trained_fixture();
  Observation o = f.data.manifest[3];
  o.weather.reset();
  const auto r = infer(f.bundle, o, f.data.features->get(o.id));
  EXPECT_TRUE(r.surface.degraded);
  EXPECT_TRUE(r.obstruction.has_value());
  const auto j = to_json(r);
  EXPECT_TRUE(j.at("degraded").get<bool>());
}

TEST(Inference, BatchPreservesOrder) {
  const auto& f = trained_fixture();
  const auto rs = infer_batch(f.bundle, f.data.manifest, f.data.features.get(), 2);
  ASSERT_EQ(rs.size(), f.data.manifest.size());
  for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_EQ(rs[i].id, f.data.manifest[i].id);
  EXPECT_THROW(infer_batch(f.bundle, f.data.manifest, nullptr), std::invalid_argument);
}

TEST(Obstruction, NoiseFramesSeparated) {
  const auto& f = trained_fixture();
  const auto out = run_obstruction(f.data.manifest, f.config, *f.data.features);
  EXPECT_EQ(out.model.members.size(), 3u);
  const auto& s = out.result.summary;
  EXPECT_GE(s.at("obstructed_recall").get<double>(), 0.9);
  EXPECT_GE(s.at("non_obstructed_recall").get<double>(), 0.9);
}

TEST(FeatureStoreTest, UnknownIdIsInvariantViolation) {
  EXPECT_THROW(trained_fixture().data.features->get("missing"), InvariantError);
}

TEST(Reports, ExperimentJsonRoundTrip) {
  const auto& f = trained_fixture();
  ExperimentResult r;
  r.id = "nested_cv";
  r.variants.push_back(f.nested.result);
  r.summary = {{"gain", 0.1}};
  const auto back = experiment_result_from_json(to_json(r), f.config.adjacency);
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_EQ(to_table(r).rfind("experiment,variant,scope,metric,stratum,value", 0), 0u);
  EXPECT_NE(to_text(r).find("nested_cv"), std::string::npos);
  EXPECT_THROW(r.variant("nope"), std::out_of_range);
}

TEST(Experiments, UnknownIdRejected) {
  const auto& f = trained_fixture();
  ExperimentRunner runner(f.data.manifest, f.config, f.data.features);
  EXPECT_THROW(run_experiment("bogus", runner), UsageError);
}

}  // namespace
}  // namespace roadcond
