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
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace roadcond {

// Canonical order; every probability vector, confusion matrix and forest
// output in the project is indexed this way.
enum class SurfaceClass : std::uint8_t {
  kSevereSnow = 0,
  kSnow = 1,
  kWet = 2,
  kDry = 3,
  kPoorVisibility = 4,
};
inline constexpr std::size_t kNumSurfaceClasses = 5;
inline constexpr std::array<SurfaceClass, kNumSurfaceClasses> kAllSurfaceClasses = {
    SurfaceClass::kSevereSnow, SurfaceClass::kSnow, SurfaceClass::kWet,
    SurfaceClass::kDry, SurfaceClass::kPoorVisibility};

enum class ObstructionClass : std::uint8_t {
  kObstructed = 0,
  kNonObstructed = 1,
};
inline constexpr std::size_t kNumObstructionClasses = 2;

enum class SiteQuality : std::uint8_t { kHigh, kLow };

constexpr std::size_t index_of(SurfaceClass c) { return static_cast<std::size_t>(c); }
constexpr std::size_t index_of(ObstructionClass c) { return static_cast<std::size_t>(c); }
SurfaceClass surface_class_at(std::size_t index);

std::string_view to_string(SurfaceClass c);
std::string_view to_string(ObstructionClass c);
std::string_view to_string(SiteQuality q);
std::optional<SurfaceClass> parse_surface_class(std::string_view s);
std::optional<SiteQuality> parse_quality(std::string_view s);

// A manifest label is either one of the five surface classes or an
// obstruction label.
using Label = std::variant<SurfaceClass, ObstructionClass>;
std::string_view to_string(const Label& label);
std::optional<Label> parse_label(std::string_view s);
bool is_surface(const Label& label);
bool is_obstructed(const Label& label);

// Ranking of class indices, most severe first. Generic over the class count
// so the same machinery serves the 5-class surface model and the 2-class
// obstruction model.
class SeverityOrder {
 public:
  // Throws std::invalid_argument unless `most_severe_first` is a permutation
  // of 0..n-1.
  explicit SeverityOrder(std::vector<std::size_t> most_severe_first);

  static SeverityOrder surface_default();
  static SeverityOrder obstruction_default();
  static SeverityOrder from_surface(std::span<const SurfaceClass> most_severe_first);

  std::size_t rank(std::size_t class_index) const { return rank_.at(class_index); }
  std::size_t size() const { return order_.size(); }
  const std::vector<std::size_t>& order() const { return order_; }

  // True when `a` is strictly more severe than `b`.
  bool more_severe(std::size_t a, std::size_t b) const { return rank(a) < rank(b); }
  std::size_t most_severe(std::span<const std::size_t> classes) const;

  bool operator==(const SeverityOrder&) const = default;

 private:
  std::vector<std::size_t> order_;
  std::vector<std::size_t> rank_;
};

std::size_t severity_rank(SurfaceClass c, const SeverityOrder& order);

class AdjacencyMap {
 public:
  // Throws std::invalid_argument if the edge set is asymmetric or contains a
  // self edge.
  explicit AdjacencyMap(const std::array<std::array<bool, kNumSurfaceClasses>, kNumSurfaceClasses>& edges);

  // SevereSnow-Snow, Snow-Wet, Wet-Dry, PoorVisibility-{Wet, SevereSnow, Dry}.
  static AdjacencyMap surface_default();
  static AdjacencyMap from_pairs(std::span<const std::pair<SurfaceClass, SurfaceClass>> pairs);

  bool contains(std::size_t a, std::size_t b) const { return edges_.at(a).at(b); }
  std::vector<SurfaceClass> neighbours(SurfaceClass c) const;

  bool operator==(const AdjacencyMap&) const = default;

 private:
  std::array<std::array<bool, kNumSurfaceClasses>, kNumSurfaceClasses> edges_{};
};

// Throws std::invalid_argument when a == b.
bool is_adjacent(SurfaceClass a, SurfaceClass b, const AdjacencyMap& adjacency);

class ClassProbabilities {
 public:
  static constexpr double kSumTolerance = 1e-9;

  ClassProbabilities();  // uniform
  // Validates entries in [0,1] and sum within kSumTolerance of 1.
  explicit ClassProbabilities(const std::array<double, kNumSurfaceClasses>& p);
  // Validates entries are nonnegative, then divides by their sum.
  static ClassProbabilities normalized(std::span<const double> weights);

  double operator[](SurfaceClass c) const { return p_[index_of(c)]; }
  double operator[](std::size_t i) const { return p_.at(i); }
  const std::array<double, kNumSurfaceClasses>& values() const { return p_; }
  std::span<const double> span() const { return p_; }

  bool operator==(const ClassProbabilities&) const = default;

 private:
  std::array<double, kNumSurfaceClasses> p_;
};

inline constexpr std::size_t kNumWeatherVariables = 6;

struct WeatherVector {
  double t2m_c = 0.0;
  double rh2m_pct = 0.0;
  double wind10m_ms = 0.0;
  double snow_depth_2h_m = 0.0;
  double precip_2h_kgm2 = 0.0;
  double cloud_pct = 0.0;

  // Empty string when valid, otherwise a description of the first violation.
  std::string violation() const;
  std::array<double, kNumWeatherVariables> to_array() const;
  bool operator==(const WeatherVector&) const = default;
};

inline constexpr std::array<std::string_view, kNumWeatherVariables> kWeatherVariableNames = {
    "t2m_c", "rh2m_pct", "wind10m_ms", "snowdepth2h_m", "precip2h_kgm2", "cloud_pct"};

using Timestamp = std::chrono::sys_seconds;

// ISO-8601 with a mandatory zone designator (Z or +hh:mm / -hh:mm); the
// result is resolved to UTC. Fractional seconds are truncated.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

struct Observation {
  std::string id;
  std::string site_id;
  Timestamp timestamp{};
  std::string image_ref;
  Label label = SurfaceClass::kDry;
  SiteQuality quality = SiteQuality::kHigh;
  std::optional<WeatherVector> weather;
  std::optional<ClassProbabilities> stage1_probs;
};

}  // namespace roadcond
