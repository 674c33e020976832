#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "wisva/error.hpp"
#include "wisva/hash.hpp"
#include "wisva/io/binary.hpp"
#include "wisva/tensors.hpp"

namespace wisva::io {

inline constexpr char kDatasetMagic[4] = {'W', 'S', 'V', '1'};

inline std::string manifest_path(const std::string& dataset_path) { return dataset_path + ".json"; }

/// Serialized payload: magic, u32 count, u16 H, u16 W, u8 channels, then per
/// sample each channel and the target as f32 rows.
inline std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  if (d.samples.size() != d.split.size()) throw Error(ErrorCode::ShapeMismatch, "dataset split length");
  const int H = d.samples.empty() ? d.resolution : d.samples.front().rows();
  const int W = d.samples.empty() ? d.resolution : d.samples.front().cols();
  const int C = d.samples.empty() ? 3 : d.samples.front().channel_count();
  ByteWriter w;
  w.bytes(kDatasetMagic, 4);
  w.u32(static_cast<std::uint32_t>(d.samples.size()));
  w.u16(static_cast<std::uint16_t>(H));
  w.u16(static_cast<std::uint16_t>(W));
  w.u8(static_cast<std::uint8_t>(C));
  for (const auto& s : d.samples) {
    if (s.rows() != H || s.cols() != W || s.target.rows() != H || s.target.cols() != W || s.channel_count() != C) {
      throw Error(ErrorCode::ShapeMismatch, "dataset samples differ in shape or channel count");
    }
    for (int c = 0; c < C; ++c) w.f32s(s.channel(c).values().begin(), s.channel(c).values().end());
    w.f32s(s.target.values().begin(), s.target.values().end());
  }
  return w.buffer();
}

inline std::uint64_t dataset_hash(const std::vector<std::uint8_t>& payload) {
  Fnv1a h;
  h.update(payload.data(), payload.size());
  return h.digest();
}

inline nlohmann::json dataset_manifest(const Dataset& d, std::uint64_t payload_hash) {
  nlohmann::json m;
  m["format"] = "WSV1";
  m["count"] = d.samples.size();
  m["resolution"] = d.resolution;
  m["normalization"] = {{"sinr_min_db", d.sinr_lo_db}, {"sinr_max_db", d.sinr_hi_db}};
  m["seed"] = d.seed;
  m["config_hash"] = hex64(fnv1a(d.config_json));
  m["payload_hash"] = hex64(payload_hash);
  m["config"] = nlohmann::json::parse(d.config_json);
  auto& split = m["split"] = nlohmann::json::array();
  auto& meta = m["samples"] = nlohmann::json::array();
  for (std::size_t k = 0; k < d.samples.size(); ++k) {
    split.push_back(to_string(d.split[k]));
    const SampleMeta& sm = d.samples[k].meta;
    meta.push_back({{"scene", sm.scene_index},
                    {"ap_index", sm.ap_index},
                    {"quadrant", to_string(sm.quadrant)},
                    {"x", sm.ap.x},
                    {"y", sm.ap.y},
                    {"height", sm.ap.height},
                    {"tx_power_dbm", sm.ap.tx_power_dbm},
                    {"carrier_hz", sm.ap.carrier_hz}});
  }
  return m;
}

/// Writes `path` and its sidecar manifest `path.json`. Returns the payload hash.
inline std::uint64_t write_dataset(const Dataset& d, const std::string& path) {
  const auto payload = encode_dataset(d);
  const std::uint64_t h = dataset_hash(payload);
  write_file(path, payload);
  write_text(manifest_path(path), dataset_manifest(d, h).dump(2) + "\n");
  return h;
}

inline Dataset decode_dataset(const std::vector<std::uint8_t>& bytes, const nlohmann::json& manifest) {
  if (bytes.size() < 4 || !std::equal(kDatasetMagic, kDatasetMagic + 4, bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "not a WSV1 dataset");
  }
  ByteReader r(bytes);
  r.set_context("dataset header");
  r.str(4);
  const std::uint32_t count = r.u32();
  const int H = r.u16();
  const int W = r.u16();
  const int C = r.u8();
  if (C != 3 && C != 5) throw Error(ErrorCode::ManifestMismatch, "unsupported channel count " + std::to_string(C));

  try {
    if (manifest.at("count").get<std::uint32_t>() != count) {
      throw Error(ErrorCode::ManifestMismatch, "manifest count differs from payload");
    }
    if (manifest.at("resolution").get<int>() != H) throw Error(ErrorCode::ManifestMismatch, "manifest resolution");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, std::string("manifest: ") + e.what());
  }

  Dataset d;
  d.resolution = H;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  d.samples.resize(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    if (!r.has(plane * 4 * static_cast<std::size_t>(C + 1))) {
      throw Error(ErrorCode::TruncatedFile, "dataset truncated in sample " + std::to_string(k) + " of " +
                                                std::to_string(count));
    }
    SampleTensors& s = d.samples[k];
    auto read_grid = [&](GridF& g) {
      g = GridF(H, W);
      for (auto& v : g.values()) v = r.f32();
    };
    read_grid(s.distance);
    read_grid(s.permittivity);
    read_grid(s.ap_map);
    if (C == 5) {
      s.los.emplace();
      s.nearest_shelf.emplace();
      read_grid(*s.los);
      read_grid(*s.nearest_shelf);
    }
    read_grid(s.target);
  }
  if (r.remaining() != 0) throw Error(ErrorCode::ManifestMismatch, "trailing bytes after last sample");

  try {
    if (manifest.at("payload_hash").get<std::string>() != hex64(dataset_hash(bytes))) {
      throw Error(ErrorCode::ManifestMismatch, "payload hash differs from manifest");
    }
    d.sinr_lo_db = manifest.at("normalization").at("sinr_min_db").get<double>();
    d.sinr_hi_db = manifest.at("normalization").at("sinr_max_db").get<double>();
    d.seed = manifest.at("seed").get<std::uint64_t>();
    d.config_json = manifest.at("config").dump();
    const auto& split = manifest.at("split");
    const auto& meta = manifest.at("samples");
    if (split.size() != count || meta.size() != count) {
      throw Error(ErrorCode::ManifestMismatch, "manifest split/sample lists differ from payload count");
    }
    d.split.resize(count);
    for (std::uint32_t k = 0; k < count; ++k) {
      d.split[k] = parse_split(split[k].get<std::string>());
      SampleMeta& sm = d.samples[k].meta;
      const auto& m = meta[k];
      sm.scene_index = m.at("scene").get<int>();
      sm.ap_index = m.at("ap_index").get<int>();
      sm.quadrant = parse_quadrant(m.at("quadrant").get<std::string>());
      sm.ap.x = m.at("x").get<double>();
      sm.ap.y = m.at("y").get<double>();
      sm.ap.height = m.at("height").get<double>();
      sm.ap.tx_power_dbm = m.at("tx_power_dbm").get<double>();
      sm.ap.carrier_hz = m.at("carrier_hz").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, std::string("manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw Error(ErrorCode::ManifestMismatch, e.what());
    throw;
  }
  return d;
}

inline Dataset read_dataset(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 4 || !std::equal(kDatasetMagic, kDatasetMagic + 4, bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "'" + path + "' is not a WSV1 dataset");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(manifest_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, "unreadable manifest: " + std::string(e.what()));
  }
  return decode_dataset(bytes, manifest);
}

}  // namespace wisva::io
