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
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "roadcond/domain.hpp"

namespace roadcond {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr std::string_view kManifestHeader = "id,site_id,timestamp,image_path,label,quality";
inline constexpr std::string_view kWeatherGridHeader =
    "lat,lon,valid_time,t2m_c,rh2m_pct,wind10m_ms,snowdepth2h_m,precip2h_kgm2,cloud_pct";
inline constexpr std::string_view kProbabilityHeader =
    "id,p_severe_snow,p_snow,p_wet,p_dry,p_poor_visibility";
inline constexpr std::string_view kSitesHeader = "site_id,lat,lon";

class Manifest {
 public:
  Manifest() = default;
  // Throws DataError on duplicate ids.
  explicit Manifest(std::vector<Observation> observations, std::string source_path = {});

  const std::vector<Observation>& observations() const { return observations_; }
  std::vector<Observation>& mutable_observations() { return observations_; }
  std::size_t size() const { return observations_.size(); }
  bool empty() const { return observations_.empty(); }
  const Observation& operator[](std::size_t i) const { return observations_.at(i); }

  const std::string& source_path() const { return source_path_; }
  int schema_version() const { return kManifestSchemaVersion; }

  // Index of the observation with this id, or npos.
  std::size_t find(std::string_view id) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Distinct site ids in order of first appearance.
  std::vector<std::string> sites() const;
  // Subset preserving order.
  Manifest subset(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<Observation> observations_;
  std::string source_path_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Throws DataError naming the offending row (1-based line number) for a bad
// header, missing column, unknown label or quality, malformed timestamp or
// duplicate id.
Manifest parse_manifest(const std::string& path);
Manifest parse_manifest_text(std::string_view text, const std::string& source_path = "<memory>");
void write_manifest(const Manifest& manifest, const std::string& path);
std::string manifest_to_text(const Manifest& manifest);

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const GeoPoint&) const = default;
};

inline constexpr double kEarthRadiusKm = 6371.0;
double haversine_km(GeoPoint a, GeoPoint b);

class WeatherGrid {
 public:
  // Returns the point index, adding it if new. Throws DataError for invalid
  // coordinates.
  std::size_t add_point(GeoPoint p);
  // Throws DataError if valid_time is not on a whole hour or the vector is
  // out of range.
  void add_record(std::size_t point, Timestamp valid_time, const WeatherVector& weather);

  const std::vector<GeoPoint>& points() const { return points_; }
  const WeatherVector* find(std::size_t point, Timestamp valid_time) const;
  std::size_t record_count() const { return records_.size(); }
  const std::map<std::pair<std::size_t, std::int64_t>, WeatherVector>& records() const {
    return records_;
  }

 private:
  std::vector<GeoPoint> points_;
  std::map<std::pair<double, double>, std::size_t> point_index_;
  // (point index, hours since epoch) -> weather
  std::map<std::pair<std::size_t, std::int64_t>, WeatherVector> records_;
};

WeatherGrid parse_weather_grid(const std::string& path);
WeatherGrid parse_weather_grid_text(std::string_view text, const std::string& source = "<memory>");
void write_weather_grid(const WeatherGrid& grid, const std::string& path);

struct NearestPoint {
  std::size_t index = 0;
  double distance_km = 0.0;
};

// Argmin of haversine distance; ties go to the lowest point index.
// Throws std::invalid_argument for an empty grid.
NearestPoint nearest_grid_point(GeoPoint location, const WeatherGrid& grid);

using SiteLocations = std::map<std::string, GeoPoint>;
SiteLocations parse_sites(const std::string& path);
SiteLocations parse_sites_text(std::string_view text, const std::string& source = "<memory>");
void write_sites(const SiteLocations& sites, const std::string& path);

struct JoinReport {
  std::size_t joined = 0;
  std::size_t missing = 0;
  std::vector<std::string> missing_ids;
  double mean_distance_km = 0.0;
};

struct JoinResult {
  Manifest manifest;
  JoinReport report;
};

// Pairs each observation with the record at (nearest grid point, timestamp
// floored to the hour). Observations without such a record keep an empty
// weather field and are counted in the report; none are dropped.
// Throws DataError listing site ids that have no coordinates.
JoinResult join_weather(const Manifest& manifest, const WeatherGrid& grid,
                        const SiteLocations& sites);

// Attaches externally produced stage-1 probabilities by id. Rows summing to
// within 1e-3 of 1 are renormalized; anything else is rejected with a
// DataError naming the id.
Manifest load_probability_file(const std::string& path, const Manifest& manifest);
Manifest load_probability_text(std::string_view text, const Manifest& manifest,
                               const std::string& source = "<memory>");

struct ProbabilityRow {
  std::string id;
  std::array<double, kNumSurfaceClasses> p{};
};
void write_probability_file(const std::vector<ProbabilityRow>& rows, const std::string& path);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace roadcond
