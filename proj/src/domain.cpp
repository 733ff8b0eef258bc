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

#include "roadcond/domain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace roadcond {

namespace {

constexpr std::array<std::string_view, kNumSurfaceClasses> kSurfaceNames = {
    "severe_snow", "snow", "wet", "dry", "poor_visibility"};

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  int v = 0;
  for (char ch : s) {
    if (ch < '0' || ch > '9') return false;
    v = v * 10 + (ch - '0');
  }
  out = v;
  return true;
}

}  // namespace

SurfaceClass surface_class_at(std::size_t index) {
  if (index >= kNumSurfaceClasses) throw std::out_of_range("surface class index out of range");
  return static_cast<SurfaceClass>(index);
}

std::string_view to_string(SurfaceClass c) { return kSurfaceNames.at(index_of(c)); }

std::string_view to_string(ObstructionClass c) {
  return c == ObstructionClass::kObstructed ? "obstructed" : "non_obstructed";
}

std::string_view to_string(SiteQuality q) { return q == SiteQuality::kHigh ? "high" : "low"; }

std::optional<SurfaceClass> parse_surface_class(std::string_view s) {
  for (std::size_t i = 0; i < kSurfaceNames.size(); ++i) {
    if (kSurfaceNames[i] == s) return static_cast<SurfaceClass>(i);
  }
  return std::nullopt;
}

std::optional<SiteQuality> parse_quality(std::string_view s) {
  if (s == "high") return SiteQuality::kHigh;
  if (s == "low") return SiteQuality::kLow;
  return std::nullopt;
}

std::string_view to_string(const Label& label) {
  return std::visit([](auto c) { return to_string(c); }, label);
}

std::optional<Label> parse_label(std::string_view s) {
  if (auto c = parse_surface_class(s)) return Label{*c};
  if (s == "obstructed") return Label{ObstructionClass::kObstructed};
  if (s == "non_obstructed") return Label{ObstructionClass::kNonObstructed};
  return std::nullopt;
}

bool is_surface(const Label& label) { return std::holds_alternative<SurfaceClass>(label); }

bool is_obstructed(const Label& label) {
  const auto* o = std::get_if<ObstructionClass>(&label);
  return o != nullptr && *o == ObstructionClass::kObstructed;
}

// ---------------------------------------------------------------------------
// SeverityOrder

SeverityOrder::SeverityOrder(std::vector<std::size_t> most_severe_first)
    : order_(std::move(most_severe_first)), rank_(order_.size(), order_.size()) {
  if (order_.empty()) throw std::invalid_argument("severity order is empty");
  for (std::size_t pos = 0; pos < order_.size(); ++pos) {
    const std::size_t c = order_[pos];
    if (c >= order_.size() || rank_[c] != order_.size()) {
      throw std::invalid_argument("severity order is not a permutation");
    }
    rank_[c] = pos;
  }
}

SeverityOrder SeverityOrder::surface_default() {
  return SeverityOrder({index_of(SurfaceClass::kSevereSnow), index_of(SurfaceClass::kSnow),
                        index_of(SurfaceClass::kPoorVisibility), index_of(SurfaceClass::kWet),
                        index_of(SurfaceClass::kDry)});
}

SeverityOrder SeverityOrder::obstruction_default() {
  return SeverityOrder({index_of(ObstructionClass::kObstructed),
                        index_of(ObstructionClass::kNonObstructed)});
}

SeverityOrder SeverityOrder::from_surface(std::span<const SurfaceClass> most_severe_first) {
  if (most_severe_first.size() != kNumSurfaceClasses) {
    throw std::invalid_argument("surface severity order needs exactly five classes");
  }
  std::vector<std::size_t> order;
  for (SurfaceClass c : most_severe_first) order.push_back(index_of(c));
  return SeverityOrder(std::move(order));
}

std::size_t SeverityOrder::most_severe(std::span<const std::size_t> classes) const {
  if (classes.empty()) throw std::invalid_argument("most_severe of an empty set");
  std::size_t best = classes.front();
  for (std::size_t c : classes.subspan(1)) {
    if (more_severe(c, best)) best = c;
  }
  return best;
}

std::size_t severity_rank(SurfaceClass c, const SeverityOrder& order) {
  if (order.size() != kNumSurfaceClasses) {
    throw std::invalid_argument("severity order does not cover the surface classes");
  }
  return order.rank(index_of(c));
}

// ---------------------------------------------------------------------------
// AdjacencyMap

AdjacencyMap::AdjacencyMap(
    const std::array<std::array<bool, kNumSurfaceClasses>, kNumSurfaceClasses>& edges)
    : edges_(edges) {
  for (std::size_t a = 0; a < kNumSurfaceClasses; ++a) {
    if (edges_[a][a]) throw std::invalid_argument("adjacency map contains a self edge");
    for (std::size_t b = 0; b < kNumSurfaceClasses; ++b) {
      if (edges_[a][b] != edges_[b][a]) {
        throw std::invalid_argument("adjacency map is not symmetric between " +
                                    std::string(to_string(surface_class_at(a))) + " and " +
                                    std::string(to_string(surface_class_at(b))));
      }
    }
  }
}

AdjacencyMap AdjacencyMap::from_pairs(
    std::span<const std::pair<SurfaceClass, SurfaceClass>> pairs) {
  std::array<std::array<bool, kNumSurfaceClasses>, kNumSurfaceClasses> edges{};
  for (const auto& [a, b] : pairs) {
    edges[index_of(a)][index_of(b)] = true;
    edges[index_of(b)][index_of(a)] = true;
  }
  return AdjacencyMap(edges);
}

AdjacencyMap AdjacencyMap::surface_default() {
  using S = SurfaceClass;
  static constexpr std::array<std::pair<S, S>, 6> kPairs = {{
      {S::kSevereSnow, S::kSnow},
      {S::kSnow, S::kWet},
      {S::kWet, S::kDry},
      {S::kPoorVisibility, S::kWet},
      {S::kPoorVisibility, S::kSevereSnow},
      {S::kPoorVisibility, S::kDry},
  }};
  return from_pairs(kPairs);
}

std::vector<SurfaceClass> AdjacencyMap::neighbours(SurfaceClass c) const {
  std::vector<SurfaceClass> out;
  for (std::size_t b = 0; b < kNumSurfaceClasses; ++b) {
    if (edges_[index_of(c)][b]) out.push_back(surface_class_at(b));
  }
  return out;
}

bool is_adjacent(SurfaceClass a, SurfaceClass b, const AdjacencyMap& adjacency) {
  if (a == b) throw std::invalid_argument("adjacency is undefined for a class and itself");
  return adjacency.contains(index_of(a), index_of(b));
}

// ---------------------------------------------------------------------------
// ClassProbabilities

ClassProbabilities::ClassProbabilities() { p_.fill(1.0 / kNumSurfaceClasses); }

ClassProbabilities::ClassProbabilities(const std::array<double, kNumSurfaceClasses>& p) : p_(p) {
  double sum = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("probability outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("probabilities do not sum to 1");
  }
}

ClassProbabilities ClassProbabilities::normalized(std::span<const double> weights) {
  if (weights.size() != kNumSurfaceClasses) {
    throw std::invalid_argument("expected five class weights");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("negative class weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("class weights sum to zero");
  std::array<double, kNumSurfaceClasses> p{};
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = weights[i] / sum;
  return ClassProbabilities(p);
}

// ---------------------------------------------------------------------------
// WeatherVector

std::string WeatherVector::violation() const {
  const auto finite = to_array();
  for (std::size_t i = 0; i < finite.size(); ++i) {
    if (!std::isfinite(finite[i])) return std::string(kWeatherVariableNames[i]) + " is not finite";
  }
  if (rh2m_pct < 0.0 || rh2m_pct > 100.0) return "rh2m_pct outside [0,100]";
  if (cloud_pct < 0.0 || cloud_pct > 100.0) return "cloud_pct outside [0,100]";
  if (snow_depth_2h_m < 0.0) return "snowdepth2h_m is negative";
  if (precip_2h_kgm2 < 0.0) return "precip2h_kgm2 is negative";
  if (wind10m_ms < 0.0) return "wind10m_ms is negative";
  return {};
}

std::array<double, kNumWeatherVariables> WeatherVector::to_array() const {
  return {t2m_c, rh2m_pct, wind10m_ms, snow_depth_2h_m, precip_2h_kgm2, cloud_pct};
}

// ---------------------------------------------------------------------------
// Timestamps

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() < 20) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_int(text.substr(0, 4), year) || !parse_int(text.substr(5, 2), month) ||
      !parse_int(text.substr(8, 2), day) || !parse_int(text.substr(11, 2), hour) ||
      !parse_int(text.substr(14, 2), minute) || !parse_int(text.substr(17, 2), second)) {
    return std::nullopt;
  }
  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t n = 1;
    while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') ++n;
    if (n == 1) return std::nullopt;
    rest.remove_prefix(n);
  }
  int offset_minutes = 0;
  if (rest == "Z") {
    offset_minutes = 0;
  } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    int oh = 0, om = 0;
    if (!parse_int(rest.substr(1, 2), oh) || !parse_int(rest.substr(4, 2), om) || oh > 23 ||
        om > 59) {
      return std::nullopt;
    }
    offset_minutes = (rest[0] == '+' ? 1 : -1) * (oh * 60 + om);
  } else {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  const sys_seconds local = sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second};
  return local - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

}  // namespace roadcond
