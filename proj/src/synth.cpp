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

#include "roadcond/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "roadcond/error.hpp"

namespace roadcond {

namespace {

using Rng = std::mt19937_64;

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

Rng stream(std::uint64_t seed, std::uint64_t salt) { return Rng(seed ^ (salt * kGolden + 0x632BE59BD9B4E019ULL)); }

// Class-conditional weather means in WeatherVector order:
// t2m, rh, wind, snow depth, precipitation, cloud cover.
constexpr std::array<std::array<double, kNumWeatherVariables>, kNumSurfaceClasses> kWeatherMean{{
    {-8.0, 90.0, 9.0, 0.05, 3.0, 100.0},   // SevereSnow
    {-3.0, 85.0, 5.0, 0.02, 1.5, 95.0},    // Snow
    {4.0, 88.0, 4.0, 0.0, 2.0, 90.0},      // Wet
    {2.0, 55.0, 3.0, 0.0, 0.0, 30.0},      // Dry
    {1.0, 98.0, 2.0, 0.005, 0.5, 100.0},   // PoorVisibility
}};
constexpr std::array<double, kNumWeatherVariables> kWeatherSigma{4.0, 10.0, 2.0, 0.015, 0.8, 20.0};

std::array<double, kNumWeatherVariables> global_weather_mean(const SynthSpec& spec) {
  std::array<double, kNumWeatherVariables> g{};
  for (std::size_t c = 0; c < kNumSurfaceClasses; ++c) {
    for (std::size_t v = 0; v < kNumWeatherVariables; ++v) g[v] += spec.class_prior[c] * kWeatherMean[c][v];
  }
  return g;
}

WeatherVector draw_weather(Rng& rng, const std::array<double, kNumWeatherVariables>& global,
                           const std::array<double, kNumWeatherVariables>* class_mean, double informativeness) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, kNumWeatherVariables> v{};
  for (std::size_t i = 0; i < kNumWeatherVariables; ++i) {
    const double mean = class_mean ? global[i] + informativeness * ((*class_mean)[i] - global[i]) : global[i];
    v[i] = mean + kWeatherSigma[i] * normal(rng);
  }
  WeatherVector w;
  w.t2m_c = v[0];
  w.rh2m_pct = std::clamp(v[1], 0.0, 100.0);
  w.wind10m_ms = std::max(0.0, v[2]);
  w.snow_depth_2h_m = std::max(0.0, v[3]);
  w.precip_2h_kgm2 = std::max(0.0, v[4]);
  w.cloud_pct = std::clamp(v[5], 0.0, 100.0);
  return w;
}

std::string site_id(std::size_t s) {
  std::string digits = std::to_string(s);
  if (digits.size() < 2) digits.insert(0, 2 - digits.size(), '0');
  return "site-" + digits;
}

std::string observation_id(std::size_t s, std::size_t j) {
  std::string digits = std::to_string(j);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return site_id(s) + "-" + digits;
}

GeoPoint offset_km(GeoPoint p, double km, double bearing) {
  const double dlat = km / 111.0 * std::cos(bearing);
  const double dlon = km / (111.0 * std::cos(p.lat * std::numbers::pi / 180.0)) * std::sin(bearing);
  return {p.lat + dlat, p.lon + dlon};
}

// Separable box blur with clamped borders.
void box_blur(std::vector<float>& img, std::size_t w, std::size_t h, int radius) {
  std::vector<float> tmp(img.size());
  const float norm = 1.0f / static_cast<float>(2 * radius + 1);
  const auto iw = static_cast<int>(w), ih = static_cast<int>(h);
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (int d = -radius; d <= radius; ++d) {
          const int xx = std::clamp(x + d, 0, iw - 1);
          acc += img[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(xx)) * 3 + c];
        }
        tmp[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * 3 + c] = acc * norm;
      }
    }
  }
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (int d = -radius; d <= radius; ++d) {
          const int yy = std::clamp(y + d, 0, ih - 1);
          acc += tmp[(static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(x)) * 3 + c];
        }
        img[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * 3 + c] = acc * norm;
      }
    }
  }
}

RawImage render_noise_frame(const SynthSpec& spec, Rng& rng) {
  RawImage out(spec.image_width, spec.image_height);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& v : out.rgb) v = static_cast<std::uint8_t>(byte(rng));
  return out;
}

RawImage render_scene(const SynthSpec& spec, const SynthSite& site, SurfaceClass cls, Rng& rng) {
  const std::size_t w = spec.image_width, h = spec.image_height;
  auto unit = [](Rng& r) { return static_cast<double>(r() >> 11) * 0x1.0p-53; };
  const double u = unit(rng);             // strength of the class effect
  const double illumination = 0.8 + 0.35 * unit(rng);
  const double fog = 0.4 + 0.45 * u;
  const bool fog_road_wet = unit(rng) < 0.5;

  double p_road = 0.0, p_ground = 0.0, road_gain = 1.0, overcast = 0.0, gloss = 0.0;
  switch (cls) {
    case SurfaceClass::kSevereSnow:
      p_road = 0.5 + 0.4 * u;
      p_ground = 0.7 + 0.3 * u;
      road_gain = 1.25;
      overcast = 0.6;
      break;
    case SurfaceClass::kSnow:
      p_road = 0.12 + 0.3 * u;
      p_ground = 0.3 + 0.4 * u;
      overcast = 0.45;
      break;
    case SurfaceClass::kWet:
      road_gain = 0.55;
      gloss = 0.25 + 0.35 * u;
      overcast = 0.3;
      break;
    case SurfaceClass::kDry:
      break;
    case SurfaceClass::kPoorVisibility:
      if (fog_road_wet) {
        road_gain = 0.7;
        gloss = 0.15;
      }
      overcast = 0.7;
      break;
  }

  std::vector<float> img(w * h * 3);
  const auto bar_rows = h / 5;
  const auto horizon_row = static_cast<std::size_t>(site.horizon * static_cast<double>(h));
  const double cx = site.road_center * static_cast<double>(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::array<double, 3> v{};
      if (y < horizon_row) {
        const double t = static_cast<double>(y) / static_cast<double>(horizon_row);
        for (int c = 0; c < 3; ++c) {
          const double sky = site.sky[c] * (0.85 + 0.15 * t);
          v[c] = sky * (1.0 - overcast) + 0.72 * overcast;
        }
      } else {
        const double t = static_cast<double>(y - horizon_row) / static_cast<double>(h - horizon_row);
        const double half = (site.road_top + (site.road_bottom - site.road_top) * t) * static_cast<double>(w);
        const bool road = std::abs(static_cast<double>(x) + 0.5 - cx) <= half;
        const double speckle = road ? p_road : p_ground;
        if (speckle > 0.0 && unit(rng) < speckle) {
          v = {0.92, 0.93, 0.95};
        } else if (road) {
          const double base = (0.42 + 0.06 * (unit(rng) - 0.5)) * road_gain;
          const double band = gloss > 0.0 ? std::max(0.0, 1.0 - std::abs(t - 0.45) / 0.15) : 0.0;
          v.fill(base + gloss * band);
        } else {
          const double jitter = 0.08 * (unit(rng) - 0.5);
          for (int c = 0; c < 3; ++c) v[c] = site.ground[c] + jitter;
        }
      }
      float* px = &img[(y * w + x) * 3];
      for (int c = 0; c < 3; ++c) px[c] = static_cast<float>(v[c]);
    }
  }

  if (cls == SurfaceClass::kPoorVisibility) {
    for (auto& v : img) v = static_cast<float>(v * (1.0 - fog) + 0.78 * fog);
    box_blur(img, w, h, 3);
  }

  const bool low = site.quality == SiteQuality::kLow;
  const double noise = low ? 0.24 : 0.04;
  for (std::size_t p = 0; p < w * h; ++p) {
    // One draw supplies 21 bits of noise for each channel.
    const std::uint64_t bits = rng();
    for (std::size_t c = 0; c < 3; ++c) {
      const double r = static_cast<double>((bits >> (21 * c)) & 0x1FFFFF) * 0x1.0p-21;
      double v = (img[p * 3 + c] * site.gain[c] + site.brightness) * illumination;
      if (low) v = 0.5 + (v - 0.5) * 0.55;
      img[p * 3 + c] = static_cast<float>(v + noise * (r - 0.5));
    }
  }

  // Caption bar with block "text"; it sits in the rows preprocessing drops.
  for (std::size_t y = 0; y < bar_rows; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      float* px = &img[(y * w + x) * 3];
      px[0] = px[1] = px[2] = 0.05f;
    }
  }
  std::uniform_int_distribution<std::size_t> gx(0, w - 1);
  for (int glyph = 0; glyph < 14; ++glyph) {
    const std::size_t x0 = gx(rng), y0 = bar_rows / 4;
    for (std::size_t y = y0; y < std::min(bar_rows, y0 + bar_rows / 2); ++y) {
      for (std::size_t x = x0; x < std::min(w, x0 + 6); ++x) {
        float* px = &img[(y * w + x) * 3];
        px[0] = px[1] = px[2] = 0.95f;
      }
    }
  }

  RawImage out(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.rgb[i] = static_cast<std::uint8_t>(std::clamp(img[i], 0.0f, 1.0f) * 255.0f + 0.5f);
  }
  return out;
}

}  // namespace

SiteQuality SynthSpec::quality_of(std::size_t site) const {
  if (!site_quality.empty()) return site_quality.at(site);
  return site % 3 == 2 ? SiteQuality::kLow : SiteQuality::kHigh;
}

void SynthSpec::validate() const {
  if (n_sites == 0) throw std::invalid_argument("n_sites must be positive");
  if (observations_per_site == 0) throw std::invalid_argument("observations_per_site must be positive");
  if (!site_quality.empty() && site_quality.size() != n_sites) {
    throw std::invalid_argument("site_quality must list one entry per site");
  }
  double sum = 0.0;
  for (double p : class_prior) {
    if (!(p >= 0.0)) throw std::invalid_argument("class_prior entries must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("class_prior must sum to 1");
  if (!(weather_informativeness >= 0.0 && weather_informativeness <= 1.0)) {
    throw std::invalid_argument("weather_informativeness must lie in [0,1]");
  }
  if (!(site_prior_skew >= 0.0)) throw std::invalid_argument("site_prior_skew must be nonnegative");
  if (!(obstructed_fraction >= 0.0 && obstructed_fraction < 1.0)) {
    throw std::invalid_argument("obstructed_fraction must lie in [0,1)");
  }
  if (!(missing_weather_fraction >= 0.0 && missing_weather_fraction <= 1.0)) {
    throw std::invalid_argument("missing_weather_fraction must lie in [0,1]");
  }
  if (image_width < 32 || image_height < 32) throw std::invalid_argument("images must be at least 32x32");
}

nlohmann::json to_json(const SynthSpec& spec) {
  std::vector<std::string> quality;
  for (std::size_t s = 0; s < spec.n_sites; ++s) quality.emplace_back(to_string(spec.quality_of(s)));
  return {{"n_sites", spec.n_sites},
          {"observations_per_site", spec.observations_per_site},
          {"site_quality", quality},
          {"class_prior", spec.class_prior},
          {"weather_informativeness", spec.weather_informativeness},
          {"site_prior_skew", spec.site_prior_skew},
          {"obstructed_fraction", spec.obstructed_fraction},
          {"missing_weather_fraction", spec.missing_weather_fraction},
          {"image_width", spec.image_width},
          {"image_height", spec.image_height},
          {"seed", spec.seed}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec spec;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_sites") value.get_to(spec.n_sites);
      else if (key == "observations_per_site") value.get_to(spec.observations_per_site);
      else if (key == "class_prior") value.get_to(spec.class_prior);
      else if (key == "weather_informativeness") value.get_to(spec.weather_informativeness);
      else if (key == "site_prior_skew") value.get_to(spec.site_prior_skew);
      else if (key == "obstructed_fraction") value.get_to(spec.obstructed_fraction);
      else if (key == "missing_weather_fraction") value.get_to(spec.missing_weather_fraction);
      else if (key == "image_width") value.get_to(spec.image_width);
      else if (key == "image_height") value.get_to(spec.image_height);
      else if (key == "seed") value.get_to(spec.seed);
      else if (key == "site_quality") {
        spec.site_quality.clear();
        for (const auto& q : value) {
          const auto parsed = parse_quality(q.get<std::string>());
          if (!parsed) throw std::invalid_argument("unknown site quality " + q.get<std::string>());
          spec.site_quality.push_back(*parsed);
        }
      } else {
        throw std::invalid_argument("unknown synth spec key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed synth spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::vector<SynthSite> synth_sites(const SynthSpec& spec) {
  spec.validate();
  std::vector<SynthSite> sites;
  sites.reserve(spec.n_sites);
  for (std::size_t s = 0; s < spec.n_sites; ++s) {
    Rng rng = stream(spec.seed, 1000 + s);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    SynthSite site;
    site.id = site_id(s);
    site.quality = spec.quality_of(s);
    site.location = {between(41.0, 44.5), between(-79.0, -73.8)};
    double total = 0.0;
    for (std::size_t c = 0; c < kNumSurfaceClasses; ++c) {
      site.class_prior[c] = spec.class_prior[c] * std::exp(spec.site_prior_skew * normal(rng));
      total += site.class_prior[c];
    }
    for (double& p : site.class_prior) p /= total;
    for (double& g : site.gain) g = between(0.7, 1.3);
    site.brightness = between(-0.12, 0.12);
    const double sky_level = between(0.8, 1.1);
    site.sky = {0.55 * sky_level, 0.68 * sky_level, 0.9 * sky_level};
    const bool green = unit(rng) < 0.5;
    const std::array<double, 3> base = green ? std::array{0.25, 0.45, 0.2} : std::array{0.45, 0.38, 0.28};
    for (int c = 0; c < 3; ++c) site.ground[c] = base[c] + between(-0.08, 0.08);
    site.horizon = between(0.32, 0.48);
    site.road_center = between(0.35, 0.65);
    site.road_bottom = between(0.28, 0.48);
    site.road_top = between(0.02, 0.07);
    sites.push_back(site);
  }
  return sites;
}

SynthDataset synth_generate(const SynthSpec& spec) {
  const auto sites = synth_sites(spec);
  const auto global = global_weather_mean(spec);
  const Timestamp start = std::chrono::sys_days{std::chrono::year{2022} / std::chrono::January / 1};
  constexpr std::size_t kDistractors = 2;

  SynthDataset out;
  out.spec = spec;
  std::vector<Observation> observations;
  observations.reserve(spec.n_sites * spec.observations_per_site);
  Rng rng = stream(spec.seed, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t s = 0; s < sites.size(); ++s) {
    const auto& site = sites[s];
    out.sites[site.id] = site.location;
    const std::size_t own = out.grid.add_point(offset_km(site.location, 0.5 + 0.5 * unit(rng), unit(rng) * 2 * std::numbers::pi));
    std::array<std::size_t, kDistractors> distractors{};
    for (auto& d : distractors) {
      d = out.grid.add_point(offset_km(site.location, 10.0 + 10.0 * unit(rng), unit(rng) * 2 * std::numbers::pi));
    }
    std::discrete_distribution<std::size_t> pick_class(site.class_prior.begin(), site.class_prior.end());

    for (std::size_t j = 0; j < spec.observations_per_site; ++j) {
      Observation obs;
      obs.id = observation_id(s, j);
      obs.site_id = site.id;
      obs.quality = site.quality;
      obs.image_ref = std::string(kSynthImagePrefix) + obs.id;
      const auto hour = std::chrono::hours(static_cast<long>(j * 3 + s % 3));
      obs.timestamp = start + hour + std::chrono::seconds(static_cast<long>(unit(rng) * 3600.0));
      const auto cls = surface_class_at(pick_class(rng));
      const bool obstructed = spec.obstructed_fraction > 0.0 && unit(rng) < spec.obstructed_fraction;
      obs.label = obstructed ? Label{ObstructionClass::kObstructed} : Label{cls};

      const Timestamp valid = start + hour;
      const bool missing = spec.missing_weather_fraction > 0.0 && unit(rng) < spec.missing_weather_fraction;
      const WeatherVector w = draw_weather(rng, global, &kWeatherMean[index_of(cls)], spec.weather_informativeness);
      if (!missing) out.grid.add_record(own, valid, w);
      for (std::size_t d : distractors) out.grid.add_record(d, valid, draw_weather(rng, global, nullptr, 0.0));
      observations.push_back(std::move(obs));
    }
  }
  out.manifest = Manifest(std::move(observations));
  return out;
}

SyntheticImageSource::SyntheticImageSource(SynthSpec spec) : spec_(std::move(spec)) {
  for (auto& site : synth_sites(spec_)) sites_.emplace(site.id, std::move(site));
}

RawImage SyntheticImageSource::render(const Observation& observation) const {
  const auto it = sites_.find(observation.site_id);
  if (it == sites_.end()) throw DataError("synthetic image source has no site " + observation.site_id);
  Rng rng = stream(spec_.seed, fnv1a(observation.id));
  if (is_obstructed(observation.label)) return render_noise_frame(spec_, rng);
  return render_scene(spec_, it->second, std::get<SurfaceClass>(observation.label), rng);
}

void write_synth_dataset(const SynthDataset& dataset, const std::string& directory, bool write_images) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + directory + ": " + ec.message());

  Manifest manifest = dataset.manifest;
  if (write_images) {
    fs::create_directories(dir / "images", ec);
    if (ec) throw DataError("cannot create image directory: " + ec.message());
    const SyntheticImageSource source(dataset.spec);
    for (auto& obs : manifest.mutable_observations()) {
      const std::string rel = "images/" + obs.id + ".ppm";
      write_ppm(source.render(obs), (dir / rel).string());
      obs.image_ref = rel;
    }
  }
  write_manifest(manifest, (dir / "manifest.csv").string());
  write_weather_grid(dataset.grid, (dir / "weather_grid.csv").string());
  write_sites(dataset.sites, (dir / "sites.csv").string());
  std::ofstream spec_out(dir / "synth_spec.json");
  spec_out << to_json(dataset.spec).dump(2) << "\n";
  if (!spec_out) throw DataError("cannot write synth_spec.json in " + directory);
}

}  // namespace roadcond
