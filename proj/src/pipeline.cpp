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

#include "roadcond/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "roadcond/error.hpp"
#include "roadcond/isotonic.hpp"
#include "roadcond/parallel.hpp"

namespace roadcond {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Images and features

ManifestImageSource::ManifestImageSource(std::string base_directory, std::optional<SynthSpec> synth)
    : base_(std::move(base_directory)) {
  if (synth) synth_.emplace(std::move(*synth));
}

RawImage ManifestImageSource::load(const Observation& observation) const {
  const std::string_view ref = observation.image_ref;
  if (ref.starts_with(kSynthImagePrefix)) {
    if (!synth_) throw DataError("observation '" + observation.id + "' refers to a synthetic image but no synth_spec.json was found");
    return synth_->render(observation);
  }
  std::filesystem::path path(observation.image_ref);
  if (path.is_relative() && !base_.empty()) path = std::filesystem::path(base_) / path;
  return read_ppm(path.string());
}

std::shared_ptr<const ImageSource> image_source_for_manifest(const std::string& manifest_path) {
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  const auto spec_path = dir / "synth_spec.json";
  std::optional<SynthSpec> spec;
  if (std::filesystem::exists(spec_path)) {
    std::ifstream in(spec_path);
    try {
      spec = synth_spec_from_json(json::parse(in));
    } catch (const std::exception& e) {
      throw DataError("invalid " + spec_path.string() + ": " + e.what());
    }
  }
  return std::make_shared<ManifestImageSource>(dir.string(), std::move(spec));
}

FeatureStore::FeatureStore(std::shared_ptr<const ImageSource> images, std::size_t threads)
    : images_(std::move(images)), threads_(threads) {}

void FeatureStore::ensure(const Manifest& manifest) {
  std::vector<const Observation*> todo;
  for (const auto& o : manifest.observations()) {
    if (!rows_.count(o.id)) todo.push_back(&o);
  }
  if (todo.empty()) return;
  if (!images_) throw std::logic_error("feature store has no image source");
  std::vector<FeatureVector> out(todo.size());
  parallel_for(todo.size(), threads_, [&](std::size_t i) {
    out[i] = extract_features(preprocess_image(images_->load(*todo[i]), todo[i]->id));
  });
  for (std::size_t i = 0; i < todo.size(); ++i) rows_.emplace(todo[i]->id, out[i]);
}

std::span<const double> FeatureStore::get(const std::string& id) const {
  const auto it = rows_.find(id);
  if (it == rows_.end()) throw InvariantError("no image features extracted for '" + id + "'");
  return it->second;
}

FeatureMatrix FeatureStore::matrix(const Manifest& manifest, std::span<const std::size_t> indices) const {
  FeatureMatrix x(kImageFeatureCount);
  for (std::size_t i : indices) x.push_row(get(manifest[i].id));
  return x;
}

// ---------------------------------------------------------------------------
// Nested cross-validation

void audit_site_leakage(const Manifest& m, const MemberRoles& roles, bool shared_training,
                        const std::string& member) {
  static constexpr std::array<std::string_view, 4> kRoleNames{"stage-1 training", "stage-2 training",
                                                              "calibration", "evaluation"};
  const std::array<const std::vector<std::size_t>*, 4> lists{&roles.train1, &roles.train2, &roles.validation,
                                                             &roles.test};
  std::array<std::set<std::string>, 4> sites;
  for (std::size_t r = 0; r < lists.size(); ++r) {
    for (std::size_t i : *lists[r]) sites[r].insert(m[i].site_id);
  }
  for (std::size_t a = 0; a < lists.size(); ++a) {
    for (std::size_t b = a + 1; b < lists.size(); ++b) {
      if (shared_training && a == 0 && b == 1) continue;
      std::vector<std::string> both;
      std::set_intersection(sites[a].begin(), sites[a].end(), sites[b].begin(), sites[b].end(),
                            std::back_inserter(both));
      if (!both.empty()) {
        throw InvariantError("leakage in member (" + member + "): site " + both.front() + " appears in both " +
                             std::string(kRoleNames[a]) + " and " + std::string(kRoleNames[b]) + " data");
      }
    }
  }
}

namespace {

std::size_t surface_index(const Observation& o) { return index_of(std::get<SurfaceClass>(o.label)); }

std::uint64_t member_seed(std::uint64_t seed, std::size_t outer, std::size_t inner) {
  return seed + 1000003ULL * (outer + 1) + 7919ULL * (inner + 1);
}

constexpr std::uint64_t kStage2SeedSalt = 0x5DEECE66DULL;

std::array<double, kStage2InputCount> stage2_inputs(std::span<const double> calibrated, const WeatherVector& w) {
  std::array<double, kStage2InputCount> in{};
  std::copy(calibrated.begin(), calibrated.end(), in.begin());
  const auto wa = w.to_array();
  std::copy(wa.begin(), wa.end(), in.begin() + kNumSurfaceClasses);
  return in;
}

struct MemberRun {
  SurfaceMember member;
  std::vector<std::size_t> test;
  std::vector<std::vector<double>> stage1;  // calibrated
  std::vector<std::vector<double>> stage2;
  std::map<std::string, double> groups;
};

MemberRun train_member(const Manifest& m, std::span<const std::size_t> labels, const FeatureMatrix* image_x,
                       const FoldAssignment& folds, const OuterIteration& outer, std::size_t inner_index,
                       const PipelineConfig& config, const RunOptions& options) {
  const InnerIteration& it = outer.inner[inner_index];
  const auto idx1 = folds.observations_in(it.train1);
  const auto idx2 = folds.observations_in(it.train2);
  const auto idxv = folds.observations_in({it.validation});
  const auto idxt = folds.observations_in({outer.test});
  if (options.split_mode == SplitMode::kSiteSpecific) {
    audit_site_leakage(m, {idx1, idx2, idxv, idxt}, options.shared_training,
                       "outer " + std::to_string(outer.test) + ", inner " + std::to_string(inner_index));
  }

  const bool builtin = options.stage1_kind == Stage1Kind::kBuiltinBaseline;
  const std::uint64_t seed = member_seed(config.seed, outer.test, inner_index);
  auto image_row = [&](std::size_t i) { return builtin ? image_x->row(i) : std::span<const double>{}; };

  MemberRun run;
  SurfaceMember& member = run.member;
  member.outer_fold = outer.test;
  member.inner_index = inner_index;
  member.validation_fold = it.validation;
  member.train1_folds = it.train1;
  member.train2_folds = it.train2;

  if (builtin) {
    FeatureMatrix x1(kImageFeatureCount);
    std::vector<std::size_t> y1;
    for (std::size_t i : idx1) {
      x1.push_row(image_x->row(i));
      y1.push_back(labels[i]);
    }
    member.stage1 = train_baseline(x1, y1, kNumSurfaceClasses, config.baseline, seed, it.train1);
  } else {
    member.stage1 = external_stage1_model();
    member.stage1.training_folds = it.train1;
  }

  std::vector<std::vector<double>> pv;
  std::vector<std::size_t> yv;
  for (std::size_t i : idxv) {
    pv.push_back(predict_stage1_raw(member.stage1, m[i], image_row(i)));
    yv.push_back(labels[i]);
  }
  if (pv.size() < 2) {
    throw DataError("validation fold " + std::to_string(it.validation) + " has fewer than two observations");
  }
  member.calibrators = fit_class_calibrators(pv, yv, kNumSurfaceClasses);
  auto calibrated = [&](std::size_t i) {
    return calibrate(member.calibrators, predict_stage1_raw(member.stage1, m[i], image_row(i)));
  };

  FeatureMatrix x2(kStage2InputCount);
  std::vector<std::size_t> y2;
  for (std::size_t i : idx2) {
    if (!m[i].weather) continue;
    x2.push_row(stage2_inputs(calibrated(i), *m[i].weather));
    y2.push_back(labels[i]);
  }
  if (x2.cols() != kStage2InputCount) throw InvariantError("stage-2 training matrix is not 11 columns wide");
  member.stage2 = fit_forest(x2, y2, kNumSurfaceClasses, config.stage2, seed ^ kStage2SeedSalt,
                             stage2_feature_names(), 1);
  if (member.stage2.feature_count() != kStage2InputCount) {
    throw InvariantError("stage-2 forest does not take exactly 11 inputs");
  }

  run.test = idxt;
  for (std::size_t i : idxt) {
    auto p1 = calibrated(i);
    if (m[i].weather) {
      run.stage2.push_back(member.stage2.predict_proba(stage2_inputs(p1, *m[i].weather)));
    } else {
      run.stage2.push_back(p1);
    }
    run.stage1.push_back(std::move(p1));
  }

  std::vector<std::size_t> prob_cols(kNumSurfaceClasses), weather_cols(kNumWeatherVariables);
  std::iota(prob_cols.begin(), prob_cols.end(), 0);
  std::iota(weather_cols.begin(), weather_cols.end(), kNumSurfaceClasses);
  const auto imp = feature_importance(member.stage2, {{"stage1", prob_cols}, {"weather", weather_cols}});
  for (const auto& [name, value] : imp.groups) run.groups[name] = value;
  return run;
}

}  // namespace

Manifest surface_observations(const Manifest& manifest) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (is_surface(manifest[i].label)) keep.push_back(i);
  }
  return manifest.subset(keep);
}

NestedCvOutput run_nested_cv(const Manifest& input, const PipelineConfig& config, const FeatureStore* features,
                             const RunOptions& options) {
  config.validate();
  const Manifest m = surface_observations(input);
  if (m.empty()) throw DataError("manifest has no surface-condition observations");
  const bool builtin = options.stage1_kind == Stage1Kind::kBuiltinBaseline;
  if (builtin && !features) throw std::invalid_argument("builtin stage-1 runs need image features");

  const auto missing = static_cast<std::size_t>(
      std::count_if(m.observations().begin(), m.observations().end(), [](const Observation& o) { return !o.weather; }));
  const double missing_fraction = static_cast<double>(missing) / static_cast<double>(m.size());
  if (missing_fraction > config.max_missing_weather_fraction) {
    throw DataError(std::to_string(missing) + " of " + std::to_string(m.size()) + " observations (" +
                    format_double(100.0 * missing_fraction) + "%) have no weather; the limit is " +
                    format_double(100.0 * config.max_missing_weather_fraction) + "%");
  }

  const std::size_t k = config.outer_folds;
  const FoldAssignment folds = options.split_mode == SplitMode::kSiteSpecific
                                   ? assign_site_folds(m, k, config.seed, config.fold_balance_tolerance)
                                   : build_shuffle_plan(m, k, config.seed);
  const NestedPlan plan = options.shared_training
                              ? build_shared_training_plan(k)
                              : build_nested_plan(k, {config.train1_folds, config.train2_folds});

  std::vector<std::size_t> labels;
  labels.reserve(m.size());
  for (const auto& o : m.observations()) labels.push_back(surface_index(o));
  FeatureMatrix image_x;
  if (builtin) {
    std::vector<std::size_t> all(m.size());
    std::iota(all.begin(), all.end(), 0);
    image_x = features->matrix(m, all);
  }

  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t o = 0; o < plan.outer.size(); ++o) {
    for (std::size_t j = 0; j < plan.outer[o].inner.size(); ++j) tasks.emplace_back(o, j);
  }
  std::vector<MemberRun> runs(tasks.size());
  parallel_for(tasks.size(), config.threads, [&](std::size_t t) {
    runs[t] = train_member(m, labels, builtin ? &image_x : nullptr, folds, plan.outer[tasks[t].first],
                           tasks[t].second, config, options);
  });

  NestedCvOutput out;
  VariantResult& r = out.result;
  r.name = options.name;
  r.split_mode = options.split_mode;
  r.shared_training = options.shared_training;
  r.n_observations = m.size();
  r.n_members = runs.size();
  r.warnings = folds.warnings;

  PipelineBundle& bundle = out.bundle;
  bundle.config = config;
  bundle.stage1_kind = options.stage1_kind;
  bundle.split_mode = options.split_mode;
  bundle.k = k;
  bundle.fold_of_site = folds.fold_of_site;
  bundle.provenance = make_provenance(m, config.seed);

  std::vector<LabelledPrediction> all1, all2, all_ens, all_ens1;
  std::set<std::string> stage1_warnings;
  std::size_t t = 0;
  for (const auto& outer : plan.outer) {
    const std::size_t first = t, count = outer.inner.size();
    t += count;
    std::vector<LabelledPrediction> f1, f2, fens;
    OuterFoldModel fold_model;
    fold_model.test_fold = outer.test;
    const auto& test = runs[first].test;
    for (std::size_t q = 0; q < test.size(); ++q) {
      const std::size_t i = test[q];
      const auto quality = m[i].quality;
      if (!m[i].weather) ++r.degraded;
      std::vector<MemberOutput> o2, o1;
      for (std::size_t j = 0; j < count; ++j) {
        const MemberRun& run = runs[first + j];
        o1.push_back(make_member_output(j, run.stage1[q], config.severity));
        o2.push_back(make_member_output(j, run.stage2[q], config.severity));
        f1.push_back({labels[i], o1.back().argmax, quality});
        f2.push_back({labels[i], o2.back().argmax, quality});
      }
      fens.push_back({labels[i], combine(o2, config.severity).final_class, quality});
      all_ens1.push_back({labels[i], combine(o1, config.severity).final_class, quality});
    }
    for (std::size_t j = 0; j < count; ++j) {
      MemberRun& run = runs[first + j];
      for (const auto& [name, value] : run.groups) r.group_importance[name] += value / static_cast<double>(runs.size());
      for (const auto& w : run.member.stage1.warnings) stage1_warnings.insert(w);
      fold_model.members.push_back(std::move(run.member));
    }
    bundle.folds.push_back(std::move(fold_model));
    r.folds.push_back({outer.test, evaluate(f1, config.adjacency), evaluate(f2, config.adjacency),
                       evaluate(fens, config.adjacency)});
    all1.insert(all1.end(), f1.begin(), f1.end());
    all2.insert(all2.end(), f2.begin(), f2.end());
    all_ens.insert(all_ens.end(), fens.begin(), fens.end());
  }
  r.stage1 = evaluate(all1, config.adjacency);
  r.stage2 = evaluate(all2, config.adjacency);
  r.ensemble = evaluate(all_ens, config.adjacency);
  r.stage1_ensemble = evaluate(all_ens1, config.adjacency);
  for (const auto& w : stage1_warnings) r.warnings.push_back("stage-1: " + w);
  if (r.degraded > 0) {
    r.warnings.push_back(std::to_string(r.degraded) +
                         " test observations lacked weather; their predictions fall back to calibrated stage-1 output");
  }
  if (r.ensemble.count != m.size()) throw InvariantError("ensembled evaluation does not cover every observation");
  return out;
}

// ---------------------------------------------------------------------------
// Reports

const VariantResult& ExperimentResult::variant(std::string_view name) const {
  for (const auto& v : variants) {
    if (v.name == name) return v;
  }
  throw std::out_of_range("experiment has no variant " + std::string(name));
}

json to_json(const VariantResult& v) {
  json folds = json::array();
  for (const auto& f : v.folds) {
    folds.push_back({{"fold", f.fold},
                     {"stage1", to_json(f.stage1)},
                     {"stage2", to_json(f.stage2)},
                     {"ensemble", to_json(f.ensemble)}});
  }
  return {{"name", v.name},
          {"split_mode", to_string(v.split_mode)},
          {"shared_training", v.shared_training},
          {"observations", v.n_observations},
          {"members", v.n_members},
          {"stage1", to_json(v.stage1)},
          {"stage2", to_json(v.stage2)},
          {"ensemble", to_json(v.ensemble)},
          {"stage1_ensemble", to_json(v.stage1_ensemble)},
          {"group_importance", v.group_importance},
          {"degraded", v.degraded},
          {"warnings", v.warnings},
          {"folds", folds}};
}

json to_json(const ExperimentResult& r) {
  json variants = json::array();
  for (const auto& v : r.variants) variants.push_back(to_json(v));
  return {{"experiment", r.id}, {"variants", variants}, {"summary", r.summary}, {"notes", r.notes}};
}

ExperimentResult experiment_result_from_json(const json& j, const AdjacencyMap& adjacency) {
  try {
    ExperimentResult r;
    r.id = j.at("experiment").get<std::string>();
    r.summary = j.at("summary");
    r.notes = j.at("notes").get<std::vector<std::string>>();
    for (const auto& v : j.at("variants")) {
      VariantResult out;
      out.name = v.at("name").get<std::string>();
      out.split_mode = v.at("split_mode").get<std::string>() == "shuffle" ? SplitMode::kShuffle : SplitMode::kSiteSpecific;
      out.shared_training = v.at("shared_training").get<bool>();
      out.n_observations = v.at("observations").get<std::size_t>();
      out.n_members = v.at("members").get<std::size_t>();
      out.stage1 = eval_report_from_json(v.at("stage1"), adjacency);
      out.stage2 = eval_report_from_json(v.at("stage2"), adjacency);
      out.ensemble = eval_report_from_json(v.at("ensemble"), adjacency);
      out.stage1_ensemble = eval_report_from_json(v.at("stage1_ensemble"), adjacency);
      out.group_importance = v.at("group_importance").get<std::map<std::string, double>>();
      out.degraded = v.at("degraded").get<std::size_t>();
      out.warnings = v.at("warnings").get<std::vector<std::string>>();
      for (const auto& f : v.at("folds")) {
        out.folds.push_back({f.at("fold").get<std::size_t>(), eval_report_from_json(f.at("stage1"), adjacency),
                             eval_report_from_json(f.at("stage2"), adjacency),
                             eval_report_from_json(f.at("ensemble"), adjacency)});
      }
      r.variants.push_back(std::move(out));
    }
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed experiment result: ") + e.what());
  }
}

std::string to_text(const ExperimentResult& r) {
  std::ostringstream out;
  out << "experiment " << r.id << "\n";
  for (const auto& v : r.variants) {
    out << "\nvariant " << v.name << " (" << to_string(v.split_mode) << " split"
        << (v.shared_training ? ", shared training data" : "") << ", " << v.n_observations << " observations, "
        << v.n_members << " members)\n";
    out << to_text(v.stage1, " stage-1 alone (member level)");
    out << to_text(v.stage2, " stage-2 (member level)");
    out << to_text(v.ensemble, " stage-2 ensemble");
    out << to_text(v.stage1_ensemble, " stage-1 ensemble");
    for (const auto& [name, value] : v.group_importance) {
      out << " importance " << name << ": " << format_double(value) << "\n";
    }
    for (const auto& w : v.warnings) out << " warning: " << w << "\n";
  }
  if (!r.summary.empty()) out << "\nsummary\n" << r.summary.dump(2) << "\n";
  for (const auto& n : r.notes) out << "note: " << n << "\n";
  return out.str();
}

namespace {

void flatten(const json& j, const std::string& path, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, path.empty() ? k : path + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "." + std::to_string(i), out);
  } else if (j.is_number_float()) {
    out.emplace_back(path, format_double(j.get<double>()));
  } else if (!j.is_null()) {
    out.emplace_back(path, j.is_string() ? j.get<std::string>() : j.dump());
  }
}

}  // namespace

std::string to_table(const ExperimentResult& r) {
  std::string out = "experiment,variant,scope,metric,stratum,value\n";
  for (const auto& v : r.variants) {
    const std::string prefix = r.id + "," + v.name + ",";
    out += to_table_rows(v.stage1, prefix + "stage1");
    out += to_table_rows(v.stage2, prefix + "stage2");
    out += to_table_rows(v.ensemble, prefix + "ensemble");
    out += to_table_rows(v.stage1_ensemble, prefix + "stage1_ensemble");
    for (const auto& f : v.folds) out += to_table_rows(f.ensemble, prefix + "fold" + std::to_string(f.fold) + "_ensemble");
    for (const auto& [name, value] : v.group_importance) {
      out += prefix + "importance," + name + ",all," + format_double(value) + "\n";
    }
  }
  std::vector<std::pair<std::string, std::string>> flat;
  flatten(r.summary, "", flat);
  for (const auto& [k, v] : flat) out += r.id + ",summary,summary," + k + ",all," + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Inference

InferenceResult infer(const PipelineBundle& bundle, const Observation& observation, std::span<const double> features) {
  InferenceResult result;
  result.id = observation.id;
  const OuterFoldModel& fold = bundle.deployed();
  const SeverityOrder& severity = bundle.config.severity;
  std::vector<MemberOutput> outputs;
  for (const auto& member : fold.members) {
    auto p = calibrate(member.calibrators, predict_stage1_raw(member.stage1, observation, features));
    if (observation.weather) p = member.stage2.predict_proba(stage2_inputs(p, *observation.weather));
    outputs.push_back(make_member_output(member.inner_index, std::move(p), severity));
  }
  result.surface.decision = combine(outputs, severity);
  result.surface.degraded = !observation.weather;
  result.surface.outer_fold = fold.test_fold;

  if (bundle.obstruction) {
    std::vector<MemberOutput> obstruction;
    for (const auto& member : bundle.obstruction->members) {
      auto a = predict_stage1_raw(member.fold_models[0], observation, features);
      const auto b = predict_stage1_raw(member.fold_models[1], observation, features);
      for (std::size_t c = 0; c < a.size(); ++c) a[c] = 0.5 * (a[c] + b[c]);
      obstruction.push_back(make_member_output(member.dataset, std::move(a), SeverityOrder::obstruction_default()));
    }
    result.obstruction = combine(obstruction, SeverityOrder::obstruction_default());
  }
  return result;
}

std::vector<InferenceResult> infer_batch(const PipelineBundle& bundle, const Manifest& manifest,
                                         const FeatureStore* features, std::size_t threads) {
  const bool needs_features = bundle.stage1_kind == Stage1Kind::kBuiltinBaseline || bundle.obstruction.has_value();
  if (needs_features && !features) throw std::invalid_argument("inference with this bundle needs image features");
  std::vector<InferenceResult> out(manifest.size());
  parallel_for(manifest.size(), threads, [&](std::size_t i) {
    const auto row = needs_features ? features->get(manifest[i].id) : std::span<const double>{};
    out[i] = infer(bundle, manifest[i], row);
  });
  return out;
}

json to_json(const InferenceResult& r) {
  std::vector<std::string_view> surface_names, obstruction_names;
  for (SurfaceClass c : kAllSurfaceClasses) surface_names.push_back(to_string(c));
  for (auto c : {ObstructionClass::kObstructed, ObstructionClass::kNonObstructed}) obstruction_names.push_back(to_string(c));
  json j{{"id", r.id},
         {"surface", to_json(r.surface.decision, surface_names)},
         {"degraded", r.surface.degraded},
         {"outer_fold", r.surface.outer_fold}};
  j["obstruction"] = r.obstruction ? to_json(*r.obstruction, obstruction_names) : json(nullptr);
  return j;
}

}  // namespace roadcond
