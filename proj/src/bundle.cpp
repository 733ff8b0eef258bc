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

#include "roadcond/bundle.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

#include "roadcond/error.hpp"

namespace roadcond {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'R', 'C', 'B', 'U', 'N', 'D', 'L', '\0'};
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 8;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1U << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

json member_to_json(const SurfaceMember& m) {
  json calibrators = json::array();
  for (const auto& c : m.calibrators) calibrators.push_back(to_json(c));
  return {{"outer_fold", m.outer_fold},       {"inner_index", m.inner_index},
          {"validation_fold", m.validation_fold}, {"train1_folds", m.train1_folds},
          {"train2_folds", m.train2_folds},   {"stage1", to_json(m.stage1)},
          {"calibrators", calibrators},       {"stage2", to_json(m.stage2)}};
}

SurfaceMember member_from_json(const json& j) {
  SurfaceMember m;
  m.outer_fold = j.at("outer_fold").get<std::size_t>();
  m.inner_index = j.at("inner_index").get<std::size_t>();
  m.validation_fold = j.at("validation_fold").get<std::size_t>();
  m.train1_folds = j.at("train1_folds").get<std::vector<std::size_t>>();
  m.train2_folds = j.at("train2_folds").get<std::vector<std::size_t>>();
  m.stage1 = stage1_from_json(j.at("stage1"));
  for (const auto& c : j.at("calibrators")) m.calibrators.push_back(calibrator_from_json(c));
  m.stage2 = forest_from_json(j.at("stage2"));
  if (m.calibrators.size() != kNumSurfaceClasses || m.stage2.feature_count() != kStage2InputCount) {
    throw DataError("bundle member has the wrong shape");
  }
  return m;
}

}  // namespace

std::vector<std::string> stage2_feature_names() {
  std::vector<std::string> names;
  for (SurfaceClass c : kAllSurfaceClasses) names.push_back("p_" + std::string(to_string(c)));
  for (auto w : kWeatherVariableNames) names.emplace_back(w);
  return names;
}

const OuterFoldModel& PipelineBundle::deployed() const {
  for (const auto& f : folds) {
    if (f.test_fold == config.deploy_outer_fold) return f;
  }
  throw InvariantError("bundle has no models for outer fold " + std::to_string(config.deploy_outer_fold));
}

std::string data_fingerprint(const Manifest& manifest) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    h ^= 0xFF;
    h *= 1099511628211ULL;
  };
  for (const auto& o : manifest.observations()) {
    feed(o.id);
    feed(o.site_id);
    feed(format_timestamp(o.timestamp));
    feed(to_string(o.label));
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

Provenance make_provenance(const Manifest& manifest, std::uint64_t seed) {
  Provenance p;
  p.seed = seed;
  p.data_fingerprint = data_fingerprint(manifest);
  p.n_observations = manifest.size();
  if (!manifest.empty()) {
    const auto [lo, hi] = std::minmax_element(
        manifest.observations().begin(), manifest.observations().end(),
        [](const Observation& a, const Observation& b) { return a.timestamp < b.timestamp; });
    p.data_start = format_timestamp(lo->timestamp);
    p.data_end = format_timestamp(hi->timestamp);
  }
  return p;
}

json to_json(const PipelineBundle& b) {
  json folds = json::array();
  for (const auto& f : b.folds) {
    json members = json::array();
    for (const auto& m : f.members) members.push_back(member_to_json(m));
    folds.push_back({{"test_fold", f.test_fold}, {"members", members}});
  }
  json j{{"version", b.version},
         {"config", to_json(b.config)},
         {"stage1_kind", to_string(b.stage1_kind)},
         {"split_mode", to_string(b.split_mode)},
         {"k", b.k},
         {"fold_of_site", b.fold_of_site},
         {"folds", folds},
         {"provenance",
          {{"seed", b.provenance.seed},
           {"data_fingerprint", b.provenance.data_fingerprint},
           {"data_start", b.provenance.data_start},
           {"data_end", b.provenance.data_end},
           {"n_observations", b.provenance.n_observations}}}};
  if (b.obstruction) {
    json members = json::array();
    for (const auto& m : b.obstruction->members) {
      members.push_back(
          {{"dataset", m.dataset}, {"fold_models", {to_json(m.fold_models[0]), to_json(m.fold_models[1])}}});
    }
    j["obstruction"] = {{"members", members}};
  }
  return j;
}

PipelineBundle bundle_from_json(const json& j) {
  PipelineBundle b;
  try {
    b.version = j.at("version").get<std::uint32_t>();
    if (b.version != kBundleVersion) {
      throw DataError("unsupported bundle version " + std::to_string(b.version) + " (this build reads version " +
                      std::to_string(kBundleVersion) + ")");
    }
    b.config = config_from_json(j.at("config"));
    const auto kind = j.at("stage1_kind").get<std::string>();
    b.stage1_kind = kind == "external" ? Stage1Kind::kExternalProbabilities : Stage1Kind::kBuiltinBaseline;
    b.split_mode = j.at("split_mode").get<std::string>() == "shuffle" ? SplitMode::kShuffle : SplitMode::kSiteSpecific;
    b.k = j.at("k").get<std::size_t>();
    b.fold_of_site = j.at("fold_of_site").get<std::map<std::string, std::size_t>>();
    for (const auto& f : j.at("folds")) {
      OuterFoldModel fold;
      fold.test_fold = f.at("test_fold").get<std::size_t>();
      for (const auto& m : f.at("members")) fold.members.push_back(member_from_json(m));
      b.folds.push_back(std::move(fold));
    }
    const auto& p = j.at("provenance");
    b.provenance.seed = p.at("seed").get<std::uint64_t>();
    b.provenance.data_fingerprint = p.at("data_fingerprint").get<std::string>();
    b.provenance.data_start = p.at("data_start").get<std::string>();
    b.provenance.data_end = p.at("data_end").get<std::string>();
    b.provenance.n_observations = p.at("n_observations").get<std::size_t>();
    if (j.contains("obstruction")) {
      ObstructionModel model;
      for (const auto& m : j.at("obstruction").at("members")) {
        ObstructionMember member;
        member.dataset = m.at("dataset").get<std::size_t>();
        const auto& fm = m.at("fold_models");
        if (fm.size() != 2) throw DataError("obstruction member needs two fold models");
        member.fold_models = {stage1_from_json(fm[0]), stage1_from_json(fm[1])};
        model.members.push_back(std::move(member));
      }
      b.obstruction = std::move(model);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed bundle: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed bundle: ") + e.what());
  }
  return b;
}

std::vector<std::uint8_t> encode_bundle(const PipelineBundle& bundle) {
  const std::vector<std::uint8_t> cbor = json::to_cbor(to_json(bundle));
  uLongf packed_size = compressBound(static_cast<uLong>(cbor.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, cbor.data(), static_cast<uLong>(cbor.size()), 6) != Z_OK) {
    throw DataError("bundle compression failed");
  }
  packed.resize(packed_size);

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_le(out, bundle.version, 4);
  put_le(out, crc_of(packed.data(), packed.size()), 4);
  put_le(out, packed.size(), 8);
  out.insert(out.end(), packed.begin(), packed.end());
  return out;
}

PipelineBundle decode_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw DataError("not a roadcond bundle");
  }
  const auto version = static_cast<std::uint32_t>(get_le(&bytes[8], 4));
  if (version != kBundleVersion) {
    throw DataError("unsupported bundle version " + std::to_string(version) + " (this build reads version " +
                    std::to_string(kBundleVersion) + ")");
  }
  const auto crc = static_cast<std::uint32_t>(get_le(&bytes[12], 4));
  const auto length = get_le(&bytes[16], 8);
  if (bytes.size() - kHeaderSize != length) throw DataError("bundle is truncated or has trailing bytes");
  const std::uint8_t* payload = bytes.data() + kHeaderSize;
  if (crc_of(payload, length) != crc) throw DataError("bundle checksum mismatch");

  // The CBOR stream is inflated in growing chunks; its size is not stored.
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw DataError("cannot initialise decompression");
  zs.next_in = const_cast<Bytef*>(payload);
  zs.avail_in = static_cast<uInt>(length);
  std::vector<std::uint8_t> cbor;
  std::array<std::uint8_t, 1 << 16> chunk{};
  int rc = Z_OK;
  while (rc == Z_OK) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    cbor.insert(cbor.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
  }
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw DataError("bundle payload is corrupt");

  json j;
  try {
    j = json::from_cbor(cbor);
  } catch (const json::exception& e) {
    throw DataError(std::string("bundle payload is not valid CBOR: ") + e.what());
  }
  return bundle_from_json(j);
}

void save_bundle(const PipelineBundle& bundle, const std::string& path) {
  const auto bytes = encode_bundle(bundle);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write bundle " + path);
}

PipelineBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open bundle " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_bundle(bytes);
}

}  // namespace roadcond
