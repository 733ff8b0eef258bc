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
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "roadcond/ingest.hpp"

namespace roadcond {

enum class SplitMode { kSiteSpecific, kShuffle };
std::string_view to_string(SplitMode mode);

struct FoldAssignment {
  SplitMode mode = SplitMode::kSiteSpecific;
  std::size_t k = 0;
  // Site-specific mode only.
  std::map<std::string, std::size_t> fold_of_site;
  // Parallel to the manifest the assignment was built from.
  std::vector<std::size_t> fold_of_observation;
  std::vector<std::size_t> fold_sizes;
  // (max - min) / mean fold size.
  double imbalance = 0.0;
  std::vector<std::string> warnings;

  std::vector<std::size_t> observations_in(const std::vector<std::size_t>& folds) const;
};

// Greedy size balancing: sites in descending observation count (seeded
// shuffle orders equal counts) each go to the currently smallest fold.
// Throws DataError when there are fewer sites than folds. A warning is
// recorded when max - min fold size exceeds `tolerance` * mean size.
FoldAssignment assign_site_folds(const Manifest& manifest, std::size_t k, std::uint64_t seed,
                                 double tolerance = 0.1);

// Every site spread over every fold: each site's observations are shuffled
// and dealt round-robin.
FoldAssignment build_shuffle_plan(const Manifest& manifest, std::size_t k, std::uint64_t seed);

struct InnerIteration {
  std::vector<std::size_t> train1;
  std::vector<std::size_t> train2;
  std::size_t validation = 0;
};

struct OuterIteration {
  std::size_t test = 0;
  std::vector<InnerIteration> inner;
};

struct NestedPlan {
  std::size_t k = 0;
  std::vector<OuterIteration> outer;

  std::size_t configuration_count() const;
};

struct FoldAllocation {
  std::size_t train1 = 3;
  std::size_t train2 = 1;
};

// One outer iteration per fold; inside it each remaining fold is validation
// once and the other k-2 folds rotate between train1 and train2.
// Throws std::invalid_argument unless train1 + train2 == k - 2.
NestedPlan build_nested_plan(std::size_t k, FoldAllocation alloc = {});

// Same-dataset variant: train1 = train2 = all non-validation, non-test folds.
NestedPlan build_shared_training_plan(std::size_t k);

// Auditable dump: one entry per (outer, inner, role) with folds and sites.
nlohmann::json plan_to_json(const NestedPlan& plan, const FoldAssignment& assignment,
                            const Manifest& manifest);

// Keeps ceil(n/2) sites of each quality stratum (seeded).
// Throws DataError if a stratum is empty.
Manifest halve_sites(const Manifest& manifest, std::uint64_t seed);

struct ObstructionDataset {
  std::vector<std::size_t> members;  // manifest indices
  std::vector<std::size_t> fold;     // 0 or 1, parallel to members
  std::size_t obstructed_count = 0;
};

struct ObstructionDatasets {
  std::vector<std::size_t> obstructed;  // shared by every set
  std::vector<ObstructionDataset> sets;
};

// Obstructed observations plus, per set, a non-obstructed sample of about the
// same size stratified over (class, site) cells. Every class and every site
// with observations gets at least one member. Each set then receives a
// seeded 2-fold split stratified by label.
// Throws DataError when there are no obstructed examples or the sample would
// exceed the pool.
ObstructionDatasets sample_obstruction_datasets(const Manifest& manifest, std::size_t n_sets,
                                                std::uint64_t seed);

}  // namespace roadcond
