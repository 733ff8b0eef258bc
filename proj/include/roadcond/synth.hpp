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
#include <string>
#include <vector>

#include "json.hpp"
#include "roadcond/domain.hpp"
#include "roadcond/image.hpp"
#include "roadcond/ingest.hpp"

namespace roadcond {

// Prefix of image references rendered on demand instead of read from disk.
inline constexpr std::string_view kSynthImagePrefix = "synth:";

struct SynthSpec {
  std::size_t n_sites = 12;
  std::size_t observations_per_site = 200;
  // Empty means every third site is low quality.
  std::vector<SiteQuality> site_quality;
  std::array<double, kNumSurfaceClasses> class_prior{0.12, 0.20, 0.28, 0.28, 0.12};
  // 0 gives class-independent weather, 1 gives full class separation.
  double weather_informativeness = 0.8;
  // Spread of the per-site class priors around class_prior (0 = identical).
  double site_prior_skew = 1.0;
  double obstructed_fraction = 0.0;
  double missing_weather_fraction = 0.0;
  std::size_t image_width = 320;
  std::size_t image_height = 240;
  std::uint64_t seed = 7;

  SiteQuality quality_of(std::size_t site) const;
  // Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

// Rendering parameters of one camera site.
struct SynthSite {
  std::string id;
  SiteQuality quality = SiteQuality::kHigh;
  GeoPoint location;
  std::array<double, kNumSurfaceClasses> class_prior{};
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  double brightness = 0.0;
  std::array<double, 3> sky{};
  std::array<double, 3> ground{};
  double horizon = 0.4;        // fraction of image height
  double road_center = 0.5;    // fraction of image width
  double road_bottom = 0.4;    // half-width at the bottom, fraction of width
  double road_top = 0.05;      // half-width at the horizon
};

// Site parameters are a pure function of (spec.seed, site index).
std::vector<SynthSite> synth_sites(const SynthSpec& spec);

struct SynthDataset {
  SynthSpec spec;
  Manifest manifest;  // image refs are "synth:<id>", weather not yet joined
  WeatherGrid grid;
  SiteLocations sites;
};

// Throws std::invalid_argument for an invalid spec.
SynthDataset synth_generate(const SynthSpec& spec);

// Renders the image of a generated observation from its id, site and label.
class SyntheticImageSource {
 public:
  explicit SyntheticImageSource(SynthSpec spec);
  const SynthSpec& spec() const { return spec_; }
  // Throws DataError for an unknown site id.
  RawImage render(const Observation& observation) const;

 private:
  SynthSpec spec_;
  std::map<std::string, SynthSite> sites_;
};

// Writes manifest.csv, weather_grid.csv, sites.csv and synth_spec.json into
// `directory`. With `write_images` every observation is also rendered to
// images/<id>.ppm and the manifest points there; otherwise it keeps the
// "synth:" references.
void write_synth_dataset(const SynthDataset& dataset, const std::string& directory, bool write_images);

}  // namespace roadcond
