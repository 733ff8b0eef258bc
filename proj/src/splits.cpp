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

#include "roadcond/splits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "roadcond/error.hpp"

namespace roadcond {

using nlohmann::json;

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::kSiteSpecific ? "site" : "shuffle";
}

std::vector<std::size_t> FoldAssignment::observations_in(const std::vector<std::size_t>& folds) const {
  std::vector<bool> wanted(k, false);
  for (std::size_t f : folds) wanted.at(f) = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_observation.size(); ++i) {
    if (wanted[fold_of_observation[i]]) out.push_back(i);
  }
  return out;
}

std::size_t NestedPlan::configuration_count() const {
  std::size_t n = 0;
  for (const auto& o : outer) n += o.inner.size();
  return n;
}

namespace {

void finish_sizes(FoldAssignment& a, double tolerance) {
  a.fold_sizes.assign(a.k, 0);
  for (std::size_t f : a.fold_of_observation) ++a.fold_sizes[f];
  const auto [mn, mx] = std::minmax_element(a.fold_sizes.begin(), a.fold_sizes.end());
  const double mean = static_cast<double>(a.fold_of_observation.size()) / static_cast<double>(a.k);
  a.imbalance = mean > 0.0 ? static_cast<double>(*mx - *mn) / mean : 0.0;
  if (a.imbalance > tolerance) {
    a.warnings.push_back("fold sizes imbalanced: max " + std::to_string(*mx) + ", min " +
                         std::to_string(*mn) + " (" + format_double(a.imbalance) +
                         " of mean, tolerance " + format_double(tolerance) + ")");
  }
}

}  // namespace

FoldAssignment assign_site_folds(const Manifest& manifest, std::size_t k, std::uint64_t seed,
                                 double tolerance) {
  if (k < 2) throw std::invalid_argument("need at least two folds");
  std::vector<std::string> sites = manifest.sites();
  if (sites.size() < k) {
    throw DataError("cannot split " + std::to_string(sites.size()) + " sites into " +
                    std::to_string(k) + " site-disjoint folds");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& o : manifest.observations()) ++counts[o.site_id];

  std::sort(sites.begin(), sites.end());
  std::mt19937_64 rng(seed);
  std::shuffle(sites.begin(), sites.end(), rng);
  std::stable_sort(sites.begin(), sites.end(), [&](const std::string& a, const std::string& b) {
    return counts[a] > counts[b];
  });

  FoldAssignment a;
  a.mode = SplitMode::kSiteSpecific;
  a.k = k;
  std::vector<std::size_t> load(k, 0);
  for (const auto& s : sites) {
    const auto smallest = static_cast<std::size_t>(
        std::distance(load.begin(), std::min_element(load.begin(), load.end())));
    a.fold_of_site[s] = smallest;
    load[smallest] += counts[s];
  }
  a.fold_of_observation.reserve(manifest.size());
  for (const auto& o : manifest.observations()) a.fold_of_observation.push_back(a.fold_of_site.at(o.site_id));
  finish_sizes(a, tolerance);
  return a;
}

FoldAssignment build_shuffle_plan(const Manifest& manifest, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need at least two folds");
  std::map<std::string, std::vector<std::size_t>> by_site;
  for (std::size_t i = 0; i < manifest.size(); ++i) by_site[manifest[i].site_id].push_back(i);

  FoldAssignment a;
  a.mode = SplitMode::kShuffle;
  a.k = k;
  a.fold_of_observation.assign(manifest.size(), 0);
  std::mt19937_64 rng(seed);
  std::size_t start = 0;
  for (auto& [site, members] : by_site) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) {
      a.fold_of_observation[members[j]] = (start + j) % k;
    }
    start = (start + members.size()) % k;
    if (members.size() < k) {
      a.warnings.push_back("site " + site + " has " + std::to_string(members.size()) +
                           " observations, fewer than " + std::to_string(k) + " folds");
    }
  }
  finish_sizes(a, 0.1);
  return a;
}

NestedPlan build_nested_plan(std::size_t k, FoldAllocation alloc) {
  if (k < 3) throw std::invalid_argument("nested plan needs at least three folds");
  if (alloc.train1 < 1 || alloc.train2 < 1 || alloc.train1 + alloc.train2 != k - 2) {
    throw std::invalid_argument("train1 + train2 fold allocation must equal k - 2");
  }
  NestedPlan plan;
  plan.k = k;
  for (std::size_t t = 0; t < k; ++t) {
    OuterIteration outer;
    outer.test = t;
    std::vector<std::size_t> non_test;
    for (std::size_t f = 0; f < k; ++f) {
      if (f != t) non_test.push_back(f);
    }
    for (std::size_t j = 0; j < non_test.size(); ++j) {
      InnerIteration inner;
      inner.validation = non_test[j];
      std::vector<std::size_t> rest;
      for (std::size_t f : non_test) {
        if (f != inner.validation) rest.push_back(f);
      }
      const std::size_t rotation = (t + j) % rest.size();
      std::vector<bool> is_train2(rest.size(), false);
      for (std::size_t i = 0; i < alloc.train2; ++i) is_train2[(rotation + i) % rest.size()] = true;
      for (std::size_t i = 0; i < rest.size(); ++i) {
        (is_train2[i] ? inner.train2 : inner.train1).push_back(rest[i]);
      }
      outer.inner.push_back(std::move(inner));
    }
    plan.outer.push_back(std::move(outer));
  }
  return plan;
}

NestedPlan build_shared_training_plan(std::size_t k) {
  NestedPlan plan = build_nested_plan(k, FoldAllocation{k - 3, 1});
  for (auto& outer : plan.outer) {
    for (auto& inner : outer.inner) {
      inner.train1.insert(inner.train1.end(), inner.train2.begin(), inner.train2.end());
      std::sort(inner.train1.begin(), inner.train1.end());
      inner.train2 = inner.train1;
    }
  }
  return plan;
}

json plan_to_json(const NestedPlan& plan, const FoldAssignment& assignment, const Manifest& manifest) {
  std::vector<std::set<std::string>> fold_sites(assignment.k);
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    fold_sites.at(assignment.fold_of_observation.at(i)).insert(manifest[i].site_id);
  }
  auto role_entry = [&](std::size_t outer, std::size_t inner, const char* role,
                        const std::vector<std::size_t>& folds) {
    std::set<std::string> sites;
    for (std::size_t f : folds) sites.insert(fold_sites[f].begin(), fold_sites[f].end());
    return json{{"outer", outer}, {"inner", inner}, {"role", role}, {"folds", folds}, {"sites", sites}};
  };
  json entries = json::array();
  for (std::size_t o = 0; o < plan.outer.size(); ++o) {
    const auto& outer = plan.outer[o];
    for (std::size_t i = 0; i < outer.inner.size(); ++i) {
      const auto& inner = outer.inner[i];
      entries.push_back(role_entry(o, i, "train1", inner.train1));
      entries.push_back(role_entry(o, i, "train2", inner.train2));
      entries.push_back(role_entry(o, i, "validation", {inner.validation}));
      entries.push_back(role_entry(o, i, "test", {outer.test}));
    }
  }
  json fold_sizes = assignment.fold_sizes;
  return json{{"mode", to_string(assignment.mode)},
              {"k", plan.k},
              {"fold_sizes", fold_sizes},
              {"imbalance", assignment.imbalance},
              {"warnings", assignment.warnings},
              {"entries", entries}};
}

Manifest halve_sites(const Manifest& manifest, std::uint64_t seed) {
  std::map<SiteQuality, std::vector<std::string>> strata{{SiteQuality::kHigh, {}}, {SiteQuality::kLow, {}}};
  std::set<std::string> seen;
  for (const auto& o : manifest.observations()) {
    if (seen.insert(o.site_id).second) strata[o.quality].push_back(o.site_id);
  }
  std::mt19937_64 rng(seed);
  std::set<std::string> keep;
  for (auto& [quality, sites] : strata) {
    if (sites.empty()) {
      throw DataError("cannot halve sites: no " + std::string(to_string(quality)) + "-quality sites");
    }
    std::sort(sites.begin(), sites.end());
    std::shuffle(sites.begin(), sites.end(), rng);
    const std::size_t retain = (sites.size() + 1) / 2;
    keep.insert(sites.begin(), sites.begin() + static_cast<std::ptrdiff_t>(retain));
  }
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (keep.contains(manifest[i].site_id)) indices.push_back(i);
  }
  return manifest.subset(indices);
}

namespace {

using CellKey = std::pair<std::string, std::string>;  // (label, site)

std::vector<std::size_t> sample_non_obstructed(const Manifest& manifest,
                                               const std::map<CellKey, std::vector<std::size_t>>& cells,
                                               std::size_t target, std::mt19937_64& rng) {
  std::size_t total = 0;
  for (const auto& [key, members] : cells) total += members.size();
  std::map<CellKey, std::size_t> quota;
  std::map<CellKey, double> remainder;
  std::size_t assigned = 0;
  for (const auto& [key, members] : cells) {
    const double exact = static_cast<double>(target) * static_cast<double>(members.size()) /
                         static_cast<double>(total);
    quota[key] = static_cast<std::size_t>(std::floor(exact));
    remainder[key] = exact - std::floor(exact);
    assigned += quota[key];
  }
  // At least one per class, then at least one per site; each goes to that
  // group's largest cell.
  auto cover = [&](auto group_of) {
    std::map<std::string, std::size_t> group_total;
    std::map<std::string, CellKey> largest;
    for (const auto& [key, members] : cells) {
      const std::string g = group_of(key);
      group_total[g] += quota[key];
      auto it = largest.find(g);
      if (it == largest.end() || cells.at(it->second).size() < members.size()) largest[g] = key;
    }
    for (const auto& [g, n] : group_total) {
      if (n == 0) {
        ++quota[largest.at(g)];
        ++assigned;
      }
    }
  };
  cover([](const CellKey& k) { return k.first; });
  cover([](const CellKey& k) { return k.second; });
  if (assigned < target) {
    std::vector<CellKey> order;
    for (const auto& [key, members] : cells) order.push_back(key);
    std::stable_sort(order.begin(), order.end(), [&](const CellKey& a, const CellKey& b) {
      return remainder[a] > remainder[b];
    });
    for (std::size_t i = 0; assigned < target && i < order.size(); ++i) {
      if (quota[order[i]] < cells.at(order[i]).size()) {
        ++quota[order[i]];
        ++assigned;
      }
    }
  }
  std::vector<std::size_t> picked;
  for (const auto& [key, members] : cells) {
    std::vector<std::size_t> pool = members;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t n = std::min(quota[key], pool.size());
    picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(picked.begin(), picked.end());
  (void)manifest;
  return picked;
}

}  // namespace

ObstructionDatasets sample_obstruction_datasets(const Manifest& manifest, std::size_t n_sets,
                                                std::uint64_t seed) {
  ObstructionDatasets out;
  std::map<CellKey, std::vector<std::size_t>> cells;
  std::size_t pool_size = 0;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& o = manifest[i];
    if (is_obstructed(o.label)) {
      out.obstructed.push_back(i);
    } else {
      cells[{std::string(to_string(o.label)), o.site_id}].push_back(i);
      ++pool_size;
    }
  }
  if (out.obstructed.empty()) throw DataError("manifest contains no obstructed observations");
  if (pool_size == 0) throw DataError("manifest contains no non-obstructed observations");
  const std::size_t target = out.obstructed.size();
  if (target > pool_size) {
    throw DataError("obstruction sample of " + std::to_string(target) +
                    " exceeds the non-obstructed pool of " + std::to_string(pool_size));
  }
  for (std::size_t s = 0; s < n_sets; ++s) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * (s + 1));
    ObstructionDataset set;
    set.obstructed_count = out.obstructed.size();
    set.members = out.obstructed;
    const auto sampled = sample_non_obstructed(manifest, cells, target, rng);
    set.members.insert(set.members.end(), sampled.begin(), sampled.end());

    // Label-stratified 2-fold split.
    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t m = 0; m < set.members.size(); ++m) {
      by_label[std::string(to_string(manifest[set.members[m]].label))].push_back(m);
    }
    set.fold.assign(set.members.size(), 0);
    std::size_t start = 0;
    for (auto& [label, positions] : by_label) {
      std::shuffle(positions.begin(), positions.end(), rng);
      for (std::size_t j = 0; j < positions.size(); ++j) set.fold[positions[j]] = (start + j) % 2;
      start = (start + positions.size()) % 2;
    }
    out.sets.push_back(std::move(set));
  }
  return out;
}

}  // namespace roadcond
