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

#include "roadcond/ensemble.hpp"

#include <algorithm>
#include <stdexcept>

namespace roadcond {

std::size_t severity_argmax(std::span<const double> p, const SeverityOrder& severity) {
  if (p.empty() || p.size() != severity.size()) {
    throw std::invalid_argument("probability vector does not match the severity order");
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c) {
    if (p[c] > p[best] || (p[c] == p[best] && severity.more_severe(c, best))) best = c;
  }
  return best;
}

MemberOutput make_member_output(std::size_t member_id, std::vector<double> probabilities,
                                const SeverityOrder& severity) {
  MemberOutput m;
  m.member_id = member_id;
  m.argmax = severity_argmax(probabilities, severity);
  m.confidence = probabilities[m.argmax];
  m.probabilities = std::move(probabilities);
  return m;
}

std::string_view to_string(EnsembleMethod m) {
  switch (m) {
    case EnsembleMethod::kAvgAgree: return "avg_agree";
    case EnsembleMethod::kVoteAgree: return "vote_agree";
    case EnsembleMethod::kSeverityFallback: return "severity_fallback";
  }
  return "unknown";
}

namespace {

void require_members(std::span<const MemberOutput> members) {
  if (members.empty()) throw std::invalid_argument("ensemble needs at least one member");
}

std::vector<double> mean_probabilities(std::span<const MemberOutput> members) {
  std::vector<double> mean(members.front().probabilities.size(), 0.0);
  for (const auto& m : members) {
    if (m.probabilities.size() != mean.size()) throw std::invalid_argument("members disagree on class count");
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += m.probabilities[c];
  }
  for (double& v : mean) v /= static_cast<double>(members.size());
  return mean;
}

}  // namespace

std::size_t method_avg(std::span<const MemberOutput> members, const SeverityOrder& severity) {
  require_members(members);
  return severity_argmax(mean_probabilities(members), severity);
}

std::size_t method_vote(std::span<const MemberOutput> members, const SeverityOrder& severity) {
  require_members(members);
  std::vector<std::size_t> votes(severity.size(), 0);
  for (const auto& m : members) ++votes.at(m.argmax);
  std::size_t best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && severity.more_severe(c, best))) best = c;
  }
  return best;
}

std::size_t method_confidence(std::span<const MemberOutput> members) {
  require_members(members);
  const MemberOutput* best = &members.front();
  for (const auto& m : members.subspan(1)) {
    if (m.confidence > best->confidence ||
        (m.confidence == best->confidence && m.member_id < best->member_id)) {
      best = &m;
    }
  }
  return best->argmax;
}

std::size_t combine_rule(std::size_t m1, std::size_t m2, std::size_t m3, const SeverityOrder& severity,
                         EnsembleMethod* method) {
  EnsembleMethod used;
  std::size_t out;
  if (m1 == m2 || m1 == m3) {
    used = EnsembleMethod::kAvgAgree;
    out = m1;
  } else if (m2 == m3) {
    used = EnsembleMethod::kVoteAgree;
    out = m2;
  } else {
    used = EnsembleMethod::kSeverityFallback;
    const std::size_t picks[] = {m1, m2, m3};
    out = severity.most_severe(picks);
  }
  if (method) *method = used;
  return out;
}

EnsembleDecision combine(std::span<const MemberOutput> members, const SeverityOrder& severity) {
  require_members(members);
  EnsembleDecision d;
  d.mean_probabilities = mean_probabilities(members);
  d.by_average = severity_argmax(d.mean_probabilities, severity);
  d.by_vote = method_vote(members, severity);
  d.by_confidence = method_confidence(members);
  d.final_class = combine_rule(d.by_average, d.by_vote, d.by_confidence, severity, &d.method);
  d.members.assign(members.begin(), members.end());
  return d;
}

nlohmann::json to_json(const EnsembleDecision& d, std::span<const std::string_view> class_names) {
  auto name = [&](std::size_t c) { return std::string(class_names[c]); };
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : d.members) {
    members.push_back({{"member", m.member_id},
                       {"probabilities", m.probabilities},
                       {"argmax", name(m.argmax)},
                       {"confidence", m.confidence}});
  }
  return {{"final", name(d.final_class)},
          {"method", to_string(d.method)},
          {"by_average", name(d.by_average)},
          {"by_vote", name(d.by_vote)},
          {"by_confidence", name(d.by_confidence)},
          {"mean_probabilities", d.mean_probabilities},
          {"members", members}};
}

}  // namespace roadcond
