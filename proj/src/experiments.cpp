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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "roadcond/error.hpp"
#include "roadcond/parallel.hpp"
#include "roadcond/pipeline.hpp"

namespace roadcond {

using nlohmann::json;

ExperimentRunner::ExperimentRunner(Manifest manifest, PipelineConfig config, std::shared_ptr<FeatureStore> features,
                                   Stage1Kind stage1_kind)
    : manifest_(std::move(manifest)), config_(std::move(config)), features_(std::move(features)),
      stage1_kind_(stage1_kind) {
  config_.validate();
  if (features_) features_->ensure(manifest_);
}

const NestedCvOutput& ExperimentRunner::variant(const std::string& name) {
  if (const auto it = cache_.find(name); it != cache_.end()) return it->second;
  RunOptions options;
  options.name = name;
  options.stage1_kind = stage1_kind_;
  const Manifest* data = &manifest_;
  if (name == "site_full") {
  } else if (name == "shuffle_full") {
    options.split_mode = SplitMode::kShuffle;
  } else if (name == "same_dataset") {
    options.shared_training = true;
  } else if (name == "site_half" || name == "shuffle_half") {
    if (!halved_) halved_ = halve_sites(surface_observations(manifest_), config_.seed);
    data = &*halved_;
    if (name == "shuffle_half") options.split_mode = SplitMode::kShuffle;
  } else {
    throw std::invalid_argument("unknown experiment variant " + name);
  }
  return cache_.emplace(name, run_nested_cv(*data, config_, features_.get(), options)).first->second;
}

namespace {

double stratum(const EvalReport& r, SiteQuality q) {
  const auto it = r.stratum_accuracy.find(std::string(to_string(q)));
  return it == r.stratum_accuracy.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
}

json strata(const EvalReport& r) {
  json j = json::object();
  for (const auto& [q, a] : r.stratum_accuracy) j[q] = a;
  return j;
}

double low_quality_site_share(const Manifest& m) {
  std::map<std::string, SiteQuality> sites;
  for (const auto& o : m.observations()) sites[o.site_id] = o.quality;
  const auto low = std::count_if(sites.begin(), sites.end(), [](const auto& s) { return s.second == SiteQuality::kLow; });
  return sites.empty() ? 0.0 : static_cast<double>(low) / static_cast<double>(sites.size());
}

constexpr const char* kValidationNote =
    "validation accuracy is member-level stage-2 accuracy on each member's held-out outer fold; the inner "
    "validation fold is consumed by probability calibration";

}  // namespace

ExperimentResult run_same_dataset_experiment(ExperimentRunner& runner) {
  const auto& split = runner.variant("site_full").result;
  const auto& shared = runner.variant("same_dataset").result;
  ExperimentResult r;
  r.id = "same_dataset_rf";
  r.variants = {split, shared};
  r.summary = {{"split_validation_accuracy", split.stage2.accuracy},
               {"shared_validation_accuracy", shared.stage2.accuracy},
               {"accuracy_delta_shared_minus_split", shared.stage2.accuracy - split.stage2.accuracy},
               {"split_weather_importance", split.group_importance.at("weather")},
               {"shared_weather_importance", shared.group_importance.at("weather")},
               {"split_stage1_importance", split.group_importance.at("stage1")},
               {"shared_stage1_importance", shared.group_importance.at("stage1")}};
  r.notes = {kValidationNote, "both variants share the fold assignment, so they are evaluated on identical folds"};
  return r;
}

ExperimentResult run_shuffle_vs_site_experiment(ExperimentRunner& runner) {
  const auto& site = runner.variant("site_full").result;
  const auto& shuffle = runner.variant("shuffle_full").result;
  ExperimentResult r;
  r.id = "shuffle_split";
  r.variants = {site, shuffle};
  r.summary = {{"site_stage1_accuracy", site.stage1.accuracy},
               {"site_stage2_accuracy", site.stage2.accuracy},
               {"shuffle_stage1_accuracy", shuffle.stage1.accuracy},
               {"shuffle_stage2_accuracy", shuffle.stage2.accuracy},
               {"site_stage_gain", site.stage2.accuracy - site.stage1.accuracy},
               {"shuffle_stage_gain", shuffle.stage2.accuracy - shuffle.stage1.accuracy}};
  r.notes = {kValidationNote};
  return r;
}

ExperimentResult run_half_sites_experiment(ExperimentRunner& runner) {
  const auto& site_full = runner.variant("site_full").result;
  const auto& shuffle_full = runner.variant("shuffle_full").result;
  const auto& site_half = runner.variant("site_half").result;
  const auto& shuffle_half = runner.variant("shuffle_half").result;
  ExperimentResult r;
  r.id = "half_sites";
  r.variants = {site_full, shuffle_full, site_half, shuffle_half};
  json cells = json::object();
  for (const auto* v : {&site_full, &shuffle_full, &site_half, &shuffle_half}) {
    cells[v->name] = {{"accuracy", v->stage2.accuracy}, {"strata", strata(v->stage2)}};
  }
  auto drop = [](const VariantResult& full, const VariantResult& half) {
    json by_stratum = json::object();
    for (SiteQuality q : {SiteQuality::kHigh, SiteQuality::kLow}) {
      const double d = stratum(full.stage2, q) - stratum(half.stage2, q);
      by_stratum[std::string(to_string(q))] = std::isnan(d) ? json(nullptr) : json(d);
    }
    return json{{"overall", full.stage2.accuracy - half.stage2.accuracy}, {"strata", by_stratum}};
  };
  const Manifest full = surface_observations(runner.manifest());
  const Manifest half = halve_sites(full, runner.config().seed);
  r.summary = {{"cells", cells},
               {"site_drop", drop(site_full, site_half)},
               {"shuffle_drop", drop(shuffle_full, shuffle_half)},
               {"sites_full", full.sites().size()},
               {"sites_half", half.sites().size()},
               {"low_quality_site_share_full", low_quality_site_share(full)},
               {"low_quality_site_share_half", low_quality_site_share(half)}};
  r.notes = {kValidationNote};
  return r;
}

// ---------------------------------------------------------------------------
// Obstruction

ObstructionOutput run_obstruction(const Manifest& manifest, const PipelineConfig& config,
                                  const FeatureStore& features) {
  config.validate();
  const ObstructionDatasets data = sample_obstruction_datasets(manifest, config.obstruction_sets, config.seed);
  const std::size_t n_sets = data.sets.size();
  auto label_of = [&](std::size_t i) {
    return index_of(is_obstructed(manifest[i].label) ? ObstructionClass::kObstructed : ObstructionClass::kNonObstructed);
  };

  ObstructionOutput out;
  out.model.members.resize(n_sets);
  // fold_models[f] is trained on the other fold and predicts fold f.
  parallel_for(2 * n_sets, config.threads, [&](std::size_t task) {
    const std::size_t s = task / 2, f = task % 2;
    const auto& set = data.sets[s];
    std::vector<std::size_t> rows;
    for (std::size_t q = 0; q < set.members.size(); ++q) {
      if (set.fold[q] != f) rows.push_back(set.members[q]);
    }
    std::vector<std::size_t> y;
    for (std::size_t i : rows) y.push_back(label_of(i));
    const std::uint64_t seed = config.seed + 0x0B57ULL * (s + 1) + 17ULL * f;
    out.model.members[s].fold_models[f] =
        train_baseline(features.matrix(manifest, rows), y, kNumObstructionClasses, config.baseline, seed, {1 - f});
    out.model.members[s].dataset = s;
  });

  // Out-of-fold probability of every manifest row under every member.
  std::vector<std::vector<std::vector<double>>> prob(n_sets, std::vector<std::vector<double>>(manifest.size()));
  parallel_for(n_sets, config.threads, [&](std::size_t s) {
    std::vector<int> fold_of(manifest.size(), -1);
    const auto& set = data.sets[s];
    for (std::size_t q = 0; q < set.members.size(); ++q) fold_of[set.members[q]] = static_cast<int>(set.fold[q]);
    const auto& models = out.model.members[s].fold_models;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      const auto x = features.get(manifest[i].id);
      if (fold_of[i] >= 0) {
        prob[s][i] = predict_stage1_raw(models[static_cast<std::size_t>(fold_of[i])], manifest[i], x);
      } else {
        auto a = predict_stage1_raw(models[0], manifest[i], x);
        const auto b = predict_stage1_raw(models[1], manifest[i], x);
        for (std::size_t c = 0; c < a.size(); ++c) a[c] = 0.5 * (a[c] + b[c]);
        prob[s][i] = std::move(a);
      }
    }
  });

  const SeverityOrder severity = SeverityOrder::obstruction_default();
  std::vector<std::size_t> decision(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    std::vector<MemberOutput> members;
    for (std::size_t s = 0; s < n_sets; ++s) members.push_back(make_member_output(s, prob[s][i], severity));
    decision[i] = combine(members, severity).final_class;
  }

  std::vector<bool> sampled(manifest.size(), false);
  for (const auto& set : data.sets) {
    for (std::size_t i : set.members) sampled[i] = true;
  }
  std::vector<std::size_t> truth, predicted;
  std::size_t surface = 0, surface_clear = 0;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (sampled[i]) {
      truth.push_back(label_of(i));
      predicted.push_back(decision[i]);
    }
    if (is_surface(manifest[i].label)) {
      ++surface;
      if (decision[i] == index_of(ObstructionClass::kNonObstructed)) ++surface_clear;
    }
  }
  const ConfusionMatrix cm = confusion(truth, predicted, kNumObstructionClasses);
  const auto recall = recall_per_class(cm);

  json datasets = json::array();
  for (std::size_t s = 0; s < n_sets; ++s) {
    std::size_t correct = 0;
    for (std::size_t i : data.sets[s].members) {
      correct += severity_argmax(prob[s][i], severity) == label_of(i) ? 1 : 0;
    }
    datasets.push_back({{"size", data.sets[s].members.size()},
                        {"obstructed", data.sets[s].obstructed_count},
                        {"out_of_fold_accuracy",
                         static_cast<double>(correct) / static_cast<double>(data.sets[s].members.size())}});
  }
  json matrix = json::array();
  for (std::size_t t = 0; t < kNumObstructionClasses; ++t) matrix.push_back({cm(t, 0), cm(t, 1)});

  auto optional_json = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  ExperimentResult& r = out.result;
  r.id = "obstruction";
  r.summary = {{"evaluated", cm.total()},
               {"accuracy", accuracy(cm)},
               {"obstructed_recall", optional_json(recall[index_of(ObstructionClass::kObstructed)])},
               {"non_obstructed_recall", optional_json(recall[index_of(ObstructionClass::kNonObstructed)])},
               {"confusion", matrix},
               {"surface_observations", surface},
               {"non_obstructed_rate_on_surface_observations",
                surface == 0 ? json(nullptr) : json(static_cast<double>(surface_clear) / static_cast<double>(surface))},
               {"datasets", datasets}};
  r.notes = {
      "the builtin stage-1 classifier trains without epochs, so early stopping on validation accuracy is replaced "
      "by the forest's depth and leaf-size limits",
      "obstruction probabilities are not calibrated",
      "rows outside a member's sampled dataset use the mean of its two fold models"};
  return out;
}

ExperimentResult run_experiment(std::string_view id, ExperimentRunner& runner) {
  if (id == "nested_cv") {
    const auto& v = runner.variant("site_full").result;
    ExperimentResult r;
    r.id = "nested_cv";
    r.variants = {v};
    r.summary = {{"stage1_accuracy", v.stage1.accuracy},
                 {"stage2_accuracy", v.stage2.accuracy},
                 {"ensemble_accuracy", v.ensemble.accuracy},
                 {"stage1_ensemble_accuracy", v.stage1_ensemble.accuracy},
                 {"stage2_gain", v.stage2.accuracy - v.stage1.accuracy},
                 {"ensemble_gain", v.ensemble.accuracy - v.stage2.accuracy},
                 {"total_gain", v.ensemble.accuracy - v.stage1.accuracy}};
    return r;
  }
  if (id == "same_dataset_rf") return run_same_dataset_experiment(runner);
  if (id == "shuffle_split") return run_shuffle_vs_site_experiment(runner);
  if (id == "half_sites") return run_half_sites_experiment(runner);
  if (id == "obstruction") {
    if (!runner.features()) throw UsageError("the obstruction experiment needs image features");
    return run_obstruction(runner.manifest(), runner.config(), *runner.features()).result;
  }
  throw UsageError("unknown experiment '" + std::string(id) +
                   "' (expected nested_cv, same_dataset_rf, shuffle_split, half_sites or obstruction)");
}

}  // namespace roadcond
