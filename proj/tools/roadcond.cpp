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

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 invariant violation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "roadcond/bundle.hpp"
#include "roadcond/config.hpp"
#include "roadcond/error.hpp"
#include "roadcond/ingest.hpp"
#include "roadcond/pipeline.hpp"
#include "roadcond/splits.hpp"
#include "roadcond/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace roadcond;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string split_mode = "site";
  std::vector<std::string> stage1{"builtin"};
  std::string out;
  std::string data_dir;
  std::string manifest;
  std::string weather;
  std::string sites;
};

struct Dataset {
  Manifest manifest;
  std::shared_ptr<FeatureStore> features;
  Stage1Kind stage1_kind = Stage1Kind::kBuiltinBaseline;
};

PipelineConfig resolve_config(const CommonOptions& o) {
  PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

SplitMode resolve_split_mode(const CommonOptions& o) {
  if (o.split_mode == "site") return SplitMode::kSiteSpecific;
  if (o.split_mode == "shuffle") return SplitMode::kShuffle;
  throw UsageError("--split-mode must be 'site' or 'shuffle'");
}

std::string input_path(const std::string& explicit_path, const CommonOptions& o, const char* default_name) {
  if (!explicit_path.empty()) return explicit_path;
  if (o.data_dir.empty()) throw UsageError(std::string("pass --data or the path of ") + default_name);
  return (fs::path(o.data_dir) / default_name).string();
}

Manifest load_manifest_only(const CommonOptions& o) { return parse_manifest(input_path(o.manifest, o, "manifest.csv")); }

Dataset load_dataset(const CommonOptions& o, const PipelineConfig& config, bool need_features) {
  const std::string manifest_path = input_path(o.manifest, o, "manifest.csv");
  Manifest manifest = parse_manifest(manifest_path);
  const WeatherGrid grid = parse_weather_grid(input_path(o.weather, o, "weather_grid.csv"));
  const SiteLocations sites = parse_sites(input_path(o.sites, o, "sites.csv"));
  JoinResult joined = join_weather(manifest, grid, sites);
  std::cerr << "weather joined for " << joined.report.joined << " observations, missing for "
            << joined.report.missing << " (mean grid distance " << format_double(joined.report.mean_distance_km)
            << " km)\n";

  Dataset d;
  d.manifest = std::move(joined.manifest);
  if (o.stage1.empty() || o.stage1.size() > 2) throw UsageError("--stage1 takes 'builtin' or 'external <file>'");
  if (o.stage1[0] == "external") {
    if (o.stage1.size() != 2) throw UsageError("--stage1 external needs a probability file");
    d.manifest = load_probability_file(o.stage1[1], d.manifest);
    d.stage1_kind = Stage1Kind::kExternalProbabilities;
  } else if (o.stage1[0] != "builtin" || o.stage1.size() != 1) {
    throw UsageError("--stage1 takes 'builtin' or 'external <file>'");
  }
  if (need_features || d.stage1_kind == Stage1Kind::kBuiltinBaseline) {
    d.features = std::make_shared<FeatureStore>(image_source_for_manifest(manifest_path), config.threads);
    d.features->ensure(d.manifest);
  }
  return d;
}

bool has_obstructed(const Manifest& m) {
  for (const auto& o : m.observations()) {
    if (is_obstructed(o.label)) return true;
  }
  return false;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void write_result(const ExperimentResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / (r.id + ".json"), to_json(r).dump(2) + "\n");
  write_text(dir / (r.id + ".txt"), to_text(r));
  write_text(dir / (r.id + ".csv"), to_table(r));
}

void add_data_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--data", o.data_dir, "Directory holding manifest.csv, weather_grid.csv and sites.csv");
  cmd->add_option("--manifest", o.manifest, "Manifest CSV");
  cmd->add_option("--weather", o.weather, "Weather grid CSV");
  cmd->add_option("--sites", o.sites, "Site coordinates CSV");
}

int run(int argc, char** argv) {
  CLI::App app{"Two-stage road surface condition classification"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonOptions o;
  app.add_option("--config", o.config_path, "JSON pipeline configuration");
  app.add_option("--seed", o.seed, "Override the configured seed");
  app.add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  app.add_option("--split-mode", o.split_mode, "site or shuffle")->check(CLI::IsMember({"site", "shuffle"}));
  app.add_option("--stage1", o.stage1, "builtin, or external <probability file>")->expected(1, 2);
  app.add_option("--out", o.out, "Output path");

  SynthSpec spec;
  bool write_images = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--sites", spec.n_sites, "Number of camera sites");
  synth->add_option("--per-site", spec.observations_per_site, "Observations per site");
  synth->add_option("--informativeness", spec.weather_informativeness, "Weather informativeness in [0,1]");
  synth->add_option("--obstructed-fraction", spec.obstructed_fraction, "Share of obstructed frames");
  synth->add_option("--missing-weather", spec.missing_weather_fraction, "Share of observations without weather");
  synth->add_option("--synth-seed", spec.seed, "Generator seed");
  synth->add_flag("--images", write_images, "Write PPM files instead of on-demand references");

  auto* split = app.add_subcommand("split", "Write the fold assignment and nested plan");
  add_data_options(split, o);

  auto* train = app.add_subcommand("train", "Run nested cross-validation and write a model bundle");
  add_data_options(train, o);

  std::string bundle_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a bundle on a labelled manifest");
  add_data_options(eval, o);
  eval->add_option("--bundle", bundle_path, "Model bundle")->required();

  std::string experiment_id;
  auto* experiment = app.add_subcommand("experiment", "Run one experiment");
  experiment->add_option("id", experiment_id, "nested_cv, same_dataset_rf, shuffle_split, half_sites or obstruction")
      ->required();
  add_data_options(experiment, o);

  auto* infer_cmd = app.add_subcommand("infer", "Predict surface and obstruction for every observation");
  add_data_options(infer_cmd, o);
  infer_cmd->add_option("--bundle", bundle_path, "Model bundle")->required();

  std::string report_input, report_format = "text";
  auto* export_report = app.add_subcommand("export-report", "Render a saved experiment result");
  export_report->add_option("input", report_input, "Result JSON written by experiment or train")->required();
  export_report->add_option("--format", report_format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (synth->parsed()) {
    if (o.out.empty()) throw UsageError("synth needs --out <directory>");
    if (o.seed) spec.seed = *o.seed;
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    write_synth_dataset(synth_generate(spec), o.out, write_images);
    std::cout << "wrote " << spec.n_sites * spec.observations_per_site << " observations to " << o.out << "\n";
    return 0;
  }

  if (export_report->parsed()) {
    std::ifstream in(report_input);
    if (!in) throw UsageError("cannot open " + report_input);
    const PipelineConfig config = resolve_config(o);
    const auto result = experiment_result_from_json(json::parse(in), config.adjacency);
    const std::string text = report_format == "csv" ? to_table(result) : to_text(result);
    if (o.out.empty()) std::cout << text;
    else write_text(o.out, text);
    return 0;
  }

  const PipelineConfig config = resolve_config(o);

  if (split->parsed()) {
    const Manifest m = surface_observations(load_manifest_only(o));
    const SplitMode mode = resolve_split_mode(o);
    const auto folds = mode == SplitMode::kSiteSpecific
                           ? assign_site_folds(m, config.outer_folds, config.seed, config.fold_balance_tolerance)
                           : build_shuffle_plan(m, config.outer_folds, config.seed);
    const auto plan = build_nested_plan(config.outer_folds, {config.train1_folds, config.train2_folds});
    json j{{"split_mode", to_string(mode)},
           {"fold_sizes", folds.fold_sizes},
           {"imbalance", folds.imbalance},
           {"warnings", folds.warnings},
           {"fold_of_site", folds.fold_of_site},
           {"plan", plan_to_json(plan, folds, m)}};
    for (const auto& w : folds.warnings) std::cerr << "warning: " << w << "\n";
    if (o.out.empty()) std::cout << j.dump(2) << "\n";
    else write_text(o.out, j.dump(2) + "\n");
    return 0;
  }

  if (train->parsed()) {
    if (o.out.empty()) throw UsageError("train needs --out <bundle path>");
    const bool obstruction = has_obstructed(load_manifest_only(o));
    Dataset d = load_dataset(o, config, obstruction);
    RunOptions options;
    options.split_mode = resolve_split_mode(o);
    options.stage1_kind = d.stage1_kind;
    auto output = run_nested_cv(d.manifest, config, d.features.get(), options);
    ExperimentResult result;
    result.id = "train";
    result.variants = {output.result};
    if (obstruction) {
      auto obs = run_obstruction(d.manifest, config, *d.features);
      output.bundle.obstruction = std::move(obs.model);
      result.summary["obstruction"] = obs.result.summary;
      result.notes = obs.result.notes;
    }
    save_bundle(output.bundle, o.out);
    write_text(o.out + ".report.json", to_json(result).dump(2) + "\n");
    std::cout << to_text(result);
    return 0;
  }

  if (experiment->parsed()) {
    if (o.out.empty()) throw UsageError("experiment needs --out <directory>");
    Dataset d = load_dataset(o, config, experiment_id == "obstruction");
    ExperimentRunner runner(std::move(d.manifest), config, d.features, d.stage1_kind);
    const auto result = run_experiment(experiment_id, runner);
    write_result(result, o.out);
    std::cout << to_text(result);
    return 0;
  }

  if (eval->parsed() || infer_cmd->parsed()) {
    const PipelineBundle bundle = load_bundle(bundle_path);
    Dataset d = load_dataset(o, config, bundle.obstruction.has_value());
    if (d.stage1_kind != bundle.stage1_kind) throw UsageError("--stage1 does not match the bundle's stage-1 kind");
    if (data_fingerprint(surface_observations(d.manifest)) == bundle.provenance.data_fingerprint) {
      std::cerr << "warning: this manifest is the bundle's training data; results are in-sample\n";
    }
    const auto results = infer_batch(bundle, d.manifest, d.features.get(), config.threads);
    if (infer_cmd->parsed()) {
      std::string lines;
      for (const auto& r : results) lines += to_json(r).dump() + "\n";
      if (o.out.empty()) std::cout << lines;
      else write_text(o.out, lines);
      return 0;
    }
    std::vector<LabelledPrediction> surface;
    std::size_t obstructed = 0, flagged = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& obs = d.manifest[i];
      if (is_surface(obs.label)) {
        surface.push_back({index_of(std::get<SurfaceClass>(obs.label)), results[i].surface.decision.final_class,
                           obs.quality});
      } else {
        ++obstructed;
        if (results[i].obstruction &&
            results[i].obstruction->final_class == index_of(ObstructionClass::kObstructed)) {
          ++flagged;
        }
      }
    }
    if (surface.empty()) throw DataError("manifest has no surface-labelled observations to evaluate");
    const EvalReport report = evaluate(surface, bundle.config.adjacency);
    json j = to_json(report);
    if (obstructed > 0) j["obstructed_flagged"] = static_cast<double>(flagged) / static_cast<double>(obstructed);
    std::cout << to_text(report, "evaluation of " + bundle_path);
    if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
}
