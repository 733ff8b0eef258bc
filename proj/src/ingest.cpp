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

#include "roadcond/ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "roadcond/error.hpp"

namespace roadcond {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << contents;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Iterates nonblank lines, reporting 1-based line numbers.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line_no;
    if (!trim(line).empty()) fn(line_no, trim(line));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

[[noreturn]] void row_error(const std::string& source, std::size_t line, const std::string& msg) {
  throw DataError(source + ": row " + std::to_string(line) + ": " + msg);
}

double parse_double(std::string_view s, const std::string& source, std::size_t line,
                    std::string_view column) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    row_error(source, line, "malformed number in column " + std::string(column));
  }
  return v;
}

void check_header(std::string_view got, std::string_view expected, const std::string& source) {
  const auto g = split_fields(got);
  const auto e = split_fields(expected);
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (i >= g.size() || g[i] != e[i]) {
      throw DataError(source + ": row 1: missing column '" + std::string(e[i]) +
                      "' (expected header " + std::string(expected) + ")");
    }
  }
  if (g.size() != e.size()) {
    throw DataError(source + ": row 1: unexpected extra columns (expected header " +
                    std::string(expected) + ")");
  }
}

std::int64_t hours_since_epoch(Timestamp t) {
  return std::chrono::floor<std::chrono::hours>(t).time_since_epoch().count();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Manifest

Manifest::Manifest(std::vector<Observation> observations, std::string source_path)
    : observations_(std::move(observations)), source_path_(std::move(source_path)) {
  index_.reserve(observations_.size());
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    if (!index_.emplace(observations_[i].id, i).second) {
      throw DataError("duplicate observation id '" + observations_[i].id + "'");
    }
  }
}

std::size_t Manifest::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? npos : it->second;
}

std::vector<std::string> Manifest::sites() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& o : observations_) {
    if (seen.insert(o.site_id).second) out.push_back(o.site_id);
  }
  return out;
}

Manifest Manifest::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Observation> obs;
  obs.reserve(indices.size());
  for (std::size_t i : indices) obs.push_back(observations_.at(i));
  return Manifest(std::move(obs), source_path_);
}

Manifest parse_manifest_text(std::string_view text, const std::string& source) {
  std::vector<Observation> obs;
  std::unordered_map<std::string, std::size_t> seen;
  bool header_done = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_done) {
      check_header(line, kManifestHeader, source);
      header_done = true;
      return;
    }
    const auto f = split_fields(line);
    if (f.size() != 6) row_error(source, line_no, "expected 6 columns, found " + std::to_string(f.size()));
    Observation o;
    o.id = std::string(f[0]);
    if (o.id.empty()) row_error(source, line_no, "empty id");
    o.site_id = std::string(f[1]);
    if (o.site_id.empty()) row_error(source, line_no, "empty site_id");
    auto ts = parse_timestamp(f[2]);
    if (!ts) row_error(source, line_no, "malformed timestamp '" + std::string(f[2]) + "'");
    o.timestamp = *ts;
    o.image_ref = std::string(f[3]);
    auto label = parse_label(f[4]);
    if (!label) row_error(source, line_no, "unknown label '" + std::string(f[4]) + "'");
    o.label = *label;
    auto quality = parse_quality(f[5]);
    if (!quality) row_error(source, line_no, "unknown quality '" + std::string(f[5]) + "'");
    o.quality = *quality;
    if (auto [it, fresh] = seen.emplace(o.id, line_no); !fresh) {
      row_error(source, line_no,
                "duplicate id '" + o.id + "' (first seen on row " + std::to_string(it->second) + ")");
    }
    obs.push_back(std::move(o));
  });
  if (!header_done) throw DataError(source + ": empty manifest (no header)");
  return Manifest(std::move(obs), source);
}

Manifest parse_manifest(const std::string& path) { return parse_manifest_text(read_file(path), path); }

std::string manifest_to_text(const Manifest& manifest) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& o : manifest.observations()) {
    out += o.id + ',' + o.site_id + ',' + format_timestamp(o.timestamp) + ',' + o.image_ref + ',' +
           std::string(to_string(o.label)) + ',' + std::string(to_string(o.quality)) + '\n';
  }
  return out;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
  write_file(path, manifest_to_text(manifest));
}

// ---------------------------------------------------------------------------
// Weather grid

double haversine_km(GeoPoint a, GeoPoint b) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kRad;
  const double dlon = (b.lon - a.lon) * kRad;
  const double s = std::sin(dlat / 2.0);
  const double t = std::sin(dlon / 2.0);
  const double h = s * s + std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

std::size_t WeatherGrid::add_point(GeoPoint p) {
  if (!(std::abs(p.lat) <= 90.0) || !(std::abs(p.lon) <= 180.0)) {
    throw DataError("grid point coordinates out of range");
  }
  auto [it, fresh] = point_index_.emplace(std::make_pair(p.lat, p.lon), points_.size());
  if (fresh) points_.push_back(p);
  return it->second;
}

void WeatherGrid::add_record(std::size_t point, Timestamp valid_time, const WeatherVector& weather) {
  if (point >= points_.size()) throw DataError("weather record refers to unknown grid point");
  if (std::chrono::floor<std::chrono::hours>(valid_time) != valid_time) {
    throw DataError("valid_time " + format_timestamp(valid_time) + " is not on a whole hour");
  }
  if (auto v = weather.violation(); !v.empty()) throw DataError("weather record invalid: " + v);
  records_[{point, hours_since_epoch(valid_time)}] = weather;
}

const WeatherVector* WeatherGrid::find(std::size_t point, Timestamp valid_time) const {
  auto it = records_.find({point, hours_since_epoch(valid_time)});
  return it == records_.end() ? nullptr : &it->second;
}

WeatherGrid parse_weather_grid_text(std::string_view text, const std::string& source) {
  WeatherGrid grid;
  bool header_done = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_done) {
      check_header(line, kWeatherGridHeader, source);
      header_done = true;
      return;
    }
    const auto f = split_fields(line);
    if (f.size() != 9) row_error(source, line_no, "expected 9 columns");
    const GeoPoint p{parse_double(f[0], source, line_no, "lat"),
                     parse_double(f[1], source, line_no, "lon")};
    auto ts = parse_timestamp(f[2]);
    if (!ts) row_error(source, line_no, "malformed valid_time");
    WeatherVector w;
    w.t2m_c = parse_double(f[3], source, line_no, "t2m_c");
    w.rh2m_pct = parse_double(f[4], source, line_no, "rh2m_pct");
    w.wind10m_ms = parse_double(f[5], source, line_no, "wind10m_ms");
    w.snow_depth_2h_m = parse_double(f[6], source, line_no, "snowdepth2h_m");
    w.precip_2h_kgm2 = parse_double(f[7], source, line_no, "precip2h_kgm2");
    w.cloud_pct = parse_double(f[8], source, line_no, "cloud_pct");
    try {
      grid.add_record(grid.add_point(p), *ts, w);
    } catch (const DataError& e) {
      row_error(source, line_no, e.what());
    }
  });
  if (!header_done) throw DataError(source + ": empty weather grid file");
  return grid;
}

WeatherGrid parse_weather_grid(const std::string& path) {
  return parse_weather_grid_text(read_file(path), path);
}

void write_weather_grid(const WeatherGrid& grid, const std::string& path) {
  std::string out(kWeatherGridHeader);
  out += '\n';
  for (const auto& [key, w] : grid.records()) {
    const GeoPoint& p = grid.points()[key.first];
    const Timestamp t{std::chrono::hours{key.second}};
    out += format_double(p.lat) + ',' + format_double(p.lon) + ',' + format_timestamp(t) + ',' +
           format_double(w.t2m_c) + ',' + format_double(w.rh2m_pct) + ',' +
           format_double(w.wind10m_ms) + ',' + format_double(w.snow_depth_2h_m) + ',' +
           format_double(w.precip_2h_kgm2) + ',' + format_double(w.cloud_pct) + '\n';
  }
  write_file(path, out);
}

NearestPoint nearest_grid_point(GeoPoint location, const WeatherGrid& grid) {
  if (grid.points().empty()) throw std::invalid_argument("weather grid has no points");
  NearestPoint best{0, haversine_km(location, grid.points()[0])};
  for (std::size_t i = 1; i < grid.points().size(); ++i) {
    const double d = haversine_km(location, grid.points()[i]);
    if (d < best.distance_km) best = {i, d};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sites

SiteLocations parse_sites_text(std::string_view text, const std::string& source) {
  SiteLocations sites;
  bool header_done = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_done) {
      check_header(line, kSitesHeader, source);
      header_done = true;
      return;
    }
    const auto f = split_fields(line);
    if (f.size() != 3) row_error(source, line_no, "expected 3 columns");
    const GeoPoint p{parse_double(f[1], source, line_no, "lat"),
                     parse_double(f[2], source, line_no, "lon")};
    if (!(std::abs(p.lat) <= 90.0) || !(std::abs(p.lon) <= 180.0)) {
      row_error(source, line_no, "coordinates out of range");
    }
    if (!sites.emplace(std::string(f[0]), p).second) {
      row_error(source, line_no, "duplicate site '" + std::string(f[0]) + "'");
    }
  });
  return sites;
}

SiteLocations parse_sites(const std::string& path) { return parse_sites_text(read_file(path), path); }

void write_sites(const SiteLocations& sites, const std::string& path) {
  std::string out(kSitesHeader);
  out += '\n';
  for (const auto& [id, p] : sites) out += id + ',' + format_double(p.lat) + ',' + format_double(p.lon) + '\n';
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Join

JoinResult join_weather(const Manifest& manifest, const WeatherGrid& grid, const SiteLocations& sites) {
  std::set<std::string> unknown;
  for (const auto& o : manifest.observations()) {
    if (!sites.contains(o.site_id)) unknown.insert(o.site_id);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& s : unknown) list += (list.empty() ? "" : ", ") + s;
    throw DataError("sites without coordinates: " + list);
  }
  std::map<std::string, NearestPoint> nearest;
  for (const auto& [id, loc] : sites) nearest.emplace(id, nearest_grid_point(loc, grid));

  JoinResult result;
  std::vector<Observation> obs = manifest.observations();
  double distance_sum = 0.0;
  for (auto& o : obs) {
    const NearestPoint& np = nearest.at(o.site_id);
    const Timestamp hour = std::chrono::floor<std::chrono::hours>(o.timestamp);
    if (const WeatherVector* w = grid.find(np.index, hour)) {
      o.weather = *w;
      ++result.report.joined;
      distance_sum += np.distance_km;
    } else {
      o.weather.reset();
      ++result.report.missing;
      result.report.missing_ids.push_back(o.id);
    }
  }
  if (result.report.joined > 0) {
    result.report.mean_distance_km = distance_sum / static_cast<double>(result.report.joined);
  }
  result.manifest = Manifest(std::move(obs), manifest.source_path());
  return result;
}

// ---------------------------------------------------------------------------
// Probability interchange

Manifest load_probability_text(std::string_view text, const Manifest& manifest,
                               const std::string& source) {
  std::vector<Observation> obs = manifest.observations();
  bool header_done = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_done) {
      check_header(line, kProbabilityHeader, source);
      header_done = true;
      return;
    }
    const auto f = split_fields(line);
    if (f.size() != 6) row_error(source, line_no, "expected 6 columns");
    const std::string id(f[0]);
    const std::size_t idx = manifest.find(id);
    if (idx == Manifest::npos) row_error(source, line_no, "id '" + id + "' is not in the manifest");
    std::array<double, kNumSurfaceClasses> p{};
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumSurfaceClasses; ++c) {
      p[c] = parse_double(f[c + 1], source, line_no, "probability");
      if (!(p[c] >= 0.0 && p[c] <= 1.0)) {
        row_error(source, line_no, "probability outside [0,1] for id '" + id + "'");
      }
      sum += p[c];
    }
    if (std::abs(sum - 1.0) > 1e-3) {
      row_error(source, line_no, "probabilities for id '" + id + "' sum to " + format_double(sum));
    }
    if (std::abs(sum - 1.0) > ClassProbabilities::kSumTolerance) {
      for (double& v : p) v /= sum;
    }
    obs[idx].stage1_probs = ClassProbabilities(p);
  });
  if (!header_done) throw DataError(source + ": empty probability file");
  return Manifest(std::move(obs), manifest.source_path());
}

Manifest load_probability_file(const std::string& path, const Manifest& manifest) {
  return load_probability_text(read_file(path), manifest, path);
}

void write_probability_file(const std::vector<ProbabilityRow>& rows, const std::string& path) {
  std::string out(kProbabilityHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.id;
    for (double v : r.p) out += ',' + format_double(v);
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace roadcond
