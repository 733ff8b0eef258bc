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
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "roadcond/domain.hpp"

namespace roadcond {

struct MemberOutput {
  std::size_t member_id = 0;
  std::vector<double> probabilities;  // calibrated
  std::size_t argmax = 0;             // ties -> more severe class
  double confidence = 0.0;            // max calibrated probability
};

// Argmax over `p`; equal maxima resolve to the more severe class.
std::size_t severity_argmax(std::span<const double> p, const SeverityOrder& severity);

MemberOutput make_member_output(std::size_t member_id, std::vector<double> probabilities,
                                const SeverityOrder& severity);

enum class EnsembleMethod { kAvgAgree, kVoteAgree, kSeverityFallback };
std::string_view to_string(EnsembleMethod m);

struct EnsembleDecision {
  std::size_t final_class = 0;
  EnsembleMethod method = EnsembleMethod::kAvgAgree;
  std::size_t by_average = 0;     // m1
  std::size_t by_vote = 0;        // m2
  std::size_t by_confidence = 0;  // m3
  std::vector<double> mean_probabilities;
  std::vector<MemberOutput> members;
};

// Each throws std::invalid_argument for an empty member list.
std::size_t method_avg(std::span<const MemberOutput> members, const SeverityOrder& severity);
std::size_t method_vote(std::span<const MemberOutput> members, const SeverityOrder& severity);
// Member with the highest confidence; equal confidences go to the lowest
// member id.
std::size_t method_confidence(std::span<const MemberOutput> members);

// m1 if it agrees with m2 or m3; else m2 if m2 == m3; else the most severe of
// the three.
std::size_t combine_rule(std::size_t m1, std::size_t m2, std::size_t m3, const SeverityOrder& severity,
                         EnsembleMethod* method = nullptr);

EnsembleDecision combine(std::span<const MemberOutput> members, const SeverityOrder& severity);

// Full provenance record; class indices are written with `class_names`.
nlohmann::json to_json(const EnsembleDecision& d, std::span<const std::string_view> class_names);

}  // namespace roadcond
