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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "roadcond/config.hpp"
#include "roadcond/forest.hpp"
#include "roadcond/isotonic.hpp"
#include "roadcond/splits.hpp"
#include "roadcond/stage1.hpp"

namespace roadcond {

inline constexpr std::uint32_t kBundleVersion = 1;

// Number of inputs to every stage-2 forest: calibrated stage-1 probabilities
// followed by the weather variables.
inline constexpr std::size_t kStage2InputCount = kNumSurfaceClasses + kNumWeatherVariables;

std::vector<std::string> stage2_feature_names();

// One trained member of the surface-condition ensemble.
struct SurfaceMember {
  std::size_t outer_fold = 0;
  std::size_t inner_index = 0;
  std::size_t validation_fold = 0;
  std::vector<std::size_t> train1_folds;
  std::vector<std::size_t> train2_folds;
  Stage1Model stage1;
  std::vector<IsotonicCalibrator> calibrators;  // one per class
  ForestModel stage2;
  bool operator==(const SurfaceMember&) const = default;
};

struct OuterFoldModel {
  std::size_t test_fold = 0;
  std::vector<SurfaceMember> members;
  bool operator==(const OuterFoldModel&) const = default;
};

// Binary obstruction classifier from one sampled dataset: one model per
// fold of its 2-fold split.
struct ObstructionMember {
  std::size_t dataset = 0;
  std::array<Stage1Model, 2> fold_models;
  bool operator==(const ObstructionMember&) const = default;
};

struct ObstructionModel {
  std::vector<ObstructionMember> members;
  bool operator==(const ObstructionModel&) const = default;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string data_fingerprint;
  std::string data_start;  // earliest observation timestamp
  std::string data_end;    // latest observation timestamp
  std::size_t n_observations = 0;
  bool operator==(const Provenance&) const = default;
};

struct PipelineBundle {
  std::uint32_t version = kBundleVersion;
  PipelineConfig config;
  Stage1Kind stage1_kind = Stage1Kind::kBuiltinBaseline;
  SplitMode split_mode = SplitMode::kSiteSpecific;
  std::size_t k = 0;
  std::map<std::string, std::size_t> fold_of_site;
  std::vector<OuterFoldModel> folds;
  std::optional<ObstructionModel> obstruction;
  Provenance provenance;

  // Members of config.deploy_outer_fold. Throws InvariantError if absent.
  const OuterFoldModel& deployed() const;
  bool operator==(const PipelineBundle&) const = default;
};

// Hex digest over ids, sites, timestamps and labels.
std::string data_fingerprint(const Manifest& manifest);
Provenance make_provenance(const Manifest& manifest, std::uint64_t seed);

nlohmann::json to_json(const PipelineBundle& bundle);
PipelineBundle bundle_from_json(const nlohmann::json& j);

// File layout: 8-byte magic, u32 version, u32 CRC-32 of the payload, u64
// payload length, then the zlib-compressed CBOR payload (integers little
// endian).
void save_bundle(const PipelineBundle& bundle, const std::string& path);
// Throws DataError for an unreadable, truncated or corrupted file or an
// unsupported version.
PipelineBundle load_bundle(const std::string& path);

std::vector<std::uint8_t> encode_bundle(const PipelineBundle& bundle);
PipelineBundle decode_bundle(const std::vector<std::uint8_t>& bytes);

}  // namespace roadcond
