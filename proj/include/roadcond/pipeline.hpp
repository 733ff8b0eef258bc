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
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "roadcond/bundle.hpp"
#include "roadcond/config.hpp"
#include "roadcond/ensemble.hpp"
#include "roadcond/forest.hpp"
#include "roadcond/image.hpp"
#include "roadcond/ingest.hpp"
#include "roadcond/metrics.hpp"
#include "roadcond/splits.hpp"
#include "roadcond/stage1.hpp"
#include "roadcond/synth.hpp"

namespace roadcond {

class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual RawImage load(const Observation& observation) const = 0;
};

// Reads PPM files relative to `base_directory` and renders "synth:"
// references when a synthetic spec is available.
class ManifestImageSource final : public ImageSource {
 public:
  explicit ManifestImageSource(std::string base_directory, std::optional<SynthSpec> synth = std::nullopt);
  RawImage load(const Observation& observation) const override;

 private:
  std::string base_;
  std::optional<SyntheticImageSource> synth_;
};

// Picks up synth_spec.json next to the manifest when present.
std::shared_ptr<const ImageSource> image_source_for_manifest(const std::string& manifest_path);

// Image features by observation id, extracted once.
class FeatureStore {
 public:
  explicit FeatureStore(std::shared_ptr<const ImageSource> images, std::size_t threads = 0);
  void ensure(const Manifest& manifest);
  bool contains(const std::string& id) const { return rows_.count(id) != 0; }
  // Throws InvariantError for an id that was never extracted.
  std::span<const double> get(const std::string& id) const;
  FeatureMatrix matrix(const Manifest& manifest, std::span<const std::size_t> indices) const;
  std::size_t size() const { return rows_.size(); }

 private:
  std::shared_ptr<const ImageSource> images_;
  std::size_t threads_;
  std::unordered_map<std::string, FeatureVector> rows_;
};

struct RunOptions {
  std::string name = "nested_cv";
  SplitMode split_mode = SplitMode::kSiteSpecific;
  // train1 = train2 = every fold except validation and test.
  bool shared_training = false;
  Stage1Kind stage1_kind = Stage1Kind::kBuiltinBaseline;
};

struct FoldReport {
  std::size_t fold = 0;
  EvalReport stage1;     // pooled over members
  EvalReport stage2;     // pooled over members
  EvalReport ensemble;   // one decision per observation
};

struct VariantResult {
  std::string name;
  SplitMode split_mode = SplitMode::kSiteSpecific;
  bool shared_training = false;
  std::size_t n_observations = 0;
  std::size_t n_members = 0;
  std::vector<FoldReport> folds;
  EvalReport stage1;           // member-level calibrated stage-1 argmax
  EvalReport stage2;           // member-level stage-2
  EvalReport ensemble;         // ensembled stage-2
  EvalReport stage1_ensemble;  // ensembled calibrated stage-1
  // Grouped MDI importance averaged over members.
  std::map<std::string, double> group_importance;
  std::size_t degraded = 0;  // test observations without weather
  std::vector<std::string> warnings;
};

struct ExperimentResult {
  std::string id;
  std::vector<VariantResult> variants;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> notes;
  const VariantResult& variant(std::string_view name) const;
};

nlohmann::json to_json(const VariantResult& v);
nlohmann::json to_json(const ExperimentResult& r);
// Inverse of to_json. Throws std::invalid_argument on malformed input.
ExperimentResult experiment_result_from_json(const nlohmann::json& j, const AdjacencyMap& adjacency);
std::string to_text(const ExperimentResult& r);
// "experiment,variant,scope,metric,stratum,value" rows with a header.
std::string to_table(const ExperimentResult& r);

// Manifest indices used by one ensemble member in each role.
struct MemberRoles {
  std::vector<std::size_t> train1;
  std::vector<std::size_t> train2;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Throws InvariantError naming the first site found in two roles. With
// shared training the stage-1 and stage-2 training sets may overlap.
void audit_site_leakage(const Manifest& manifest, const MemberRoles& roles, bool shared_training,
                        const std::string& member);

struct NestedCvOutput {
  VariantResult result;
  PipelineBundle bundle;
};

// Observations carrying a surface label, in manifest order.
Manifest surface_observations(const Manifest& manifest);

// Trains every (outer, inner) member, ensembles each outer test fold and
// reports stage-1, stage-2 and ensembled accuracy. Observations labelled
// Obstructed are ignored. `features` may be null for external stage-1 runs.
// Throws DataError when more than config.max_missing_weather_fraction of the
// observations lack weather, InvariantError when a leakage audit or the
// stage-2 input width check fails.
NestedCvOutput run_nested_cv(const Manifest& manifest, const PipelineConfig& config, const FeatureStore* features,
                             const RunOptions& options = {});

struct ObstructionOutput {
  ExperimentResult result;
  ObstructionModel model;
};

// Throws DataError when the manifest has no obstructed observations.
ObstructionOutput run_obstruction(const Manifest& manifest, const PipelineConfig& config,
                                  const FeatureStore& features);

// Owns the inputs shared by the experiments and memoises the nested runs
// they have in common.
class ExperimentRunner {
 public:
  ExperimentRunner(Manifest manifest, PipelineConfig config, std::shared_ptr<FeatureStore> features,
                   Stage1Kind stage1_kind = Stage1Kind::kBuiltinBaseline);

  const Manifest& manifest() const { return manifest_; }
  const PipelineConfig& config() const { return config_; }
  const FeatureStore* features() const { return features_.get(); }

  // Variants: site_full, shuffle_full, site_half, shuffle_half, same_dataset.
  const NestedCvOutput& variant(const std::string& name);

 private:
  Manifest manifest_;
  std::optional<Manifest> halved_;
  PipelineConfig config_;
  std::shared_ptr<FeatureStore> features_;
  Stage1Kind stage1_kind_;
  std::map<std::string, NestedCvOutput> cache_;
};

inline constexpr std::array<std::string_view, 5> kExperimentIds{"nested_cv", "same_dataset_rf", "shuffle_split",
                                                                 "half_sites", "obstruction"};

ExperimentResult run_same_dataset_experiment(ExperimentRunner& runner);
ExperimentResult run_shuffle_vs_site_experiment(ExperimentRunner& runner);
ExperimentResult run_half_sites_experiment(ExperimentRunner& runner);
// Throws UsageError for an unknown id.
ExperimentResult run_experiment(std::string_view id, ExperimentRunner& runner);

struct SurfaceInference {
  EnsembleDecision decision;
  // Weather was missing, so members fell back to calibrated stage-1 output.
  bool degraded = false;
  std::size_t outer_fold = 0;
};

struct InferenceResult {
  std::string id;
  SurfaceInference surface;
  std::optional<EnsembleDecision> obstruction;  // when the bundle has a model
};

// `features` is read by builtin stage-1 and obstruction models.
InferenceResult infer(const PipelineBundle& bundle, const Observation& observation,
                      std::span<const double> features);
// One result per observation, in manifest order.
std::vector<InferenceResult> infer_batch(const PipelineBundle& bundle, const Manifest& manifest,
                                         const FeatureStore* features, std::size_t threads = 1);
nlohmann::json to_json(const InferenceResult& r);

}  // namespace roadcond
