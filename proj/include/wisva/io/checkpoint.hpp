#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "wisva/error.hpp"
#include "wisva/io/binary.hpp"
#include "wisva/io/config.hpp"
#include "wisva/models.hpp"
#include "wisva/nn/adam.hpp"
#include "wisva/training.hpp"

namespace wisva::io {

inline constexpr char kCheckpointMagic[4] = {'W', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> data;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelKind kind = ModelKind::vae;
  ModelConfig model;
  TrainConfig train;
  /// Payload hash of the dataset the model was trained on (hex).
  std::string dataset_hash;
  std::uint64_t rng_seed = 0;
  int epochs_done = 0;
  LossTrace trace;
  std::vector<NamedTensor> tensors;
  nn::AdamState<float> adam;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline Checkpoint make_checkpoint(const Model<float>& m, const TrainConfig& train, const FitState<float>& state,
                                  const std::string& dataset_hash) {
  Checkpoint c;
  c.kind = m.kind();
  c.model = m.config();
  c.train = train;
  c.dataset_hash = dataset_hash;
  c.rng_seed = train.seed;
  c.epochs_done = state.epochs_done;
  c.trace = state.trace;
  c.adam = state.adam;
  for (const auto& info : m.params().infos()) {
    const auto* p = m.params().data() + info.offset;
    c.tensors.push_back(NamedTensor{info.name, info.dims, std::vector<float>(p, p + info.size)});
  }
  return c;
}

/// Copies checkpoint tensors into `m`. Every model tensor must be present and
/// every checkpoint tensor must exist in the model.
inline void load_into(Model<float>& m, const Checkpoint& c) {
  if (c.kind != m.kind()) {
    throw Error(ErrorCode::KindMismatch,
                std::string("checkpoint holds a ") + to_string(c.kind) + ", model is a " + to_string(m.kind()));
  }
  for (const auto& t : c.tensors) {
    const nn::ParamInfo* info = m.params().find(t.name);
    if (info == nullptr) throw Error(ErrorCode::UnknownTensor, "checkpoint tensor '" + t.name + "' not in model");
    if (info->dims != t.dims || info->size != t.data.size()) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint tensor '" + t.name + "' has the wrong shape");
    }
  }
  for (const auto& info : m.params().infos()) {
    const auto it = std::find_if(c.tensors.begin(), c.tensors.end(),
                                 [&](const NamedTensor& t) { return t.name == info.name; });
    if (it == c.tensors.end()) throw Error(ErrorCode::ShapeMismatch, "checkpoint lacks tensor '" + info.name + "'");
    std::copy(it->data.begin(), it->data.end(), m.params().values().begin() + static_cast<std::ptrdiff_t>(info.offset));
  }
}

inline Model<float> model_from_checkpoint(const Checkpoint& c) {
  Model<float> m(c.model, c.rng_seed);
  load_into(m, c);
  return m;
}

inline FitState<float> fit_state_from_checkpoint(const Checkpoint& c) {
  FitState<float> s;
  s.epochs_done = c.epochs_done;
  s.trace = c.trace;
  s.adam = c.adam;
  return s;
}

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(c.version);
  w.u8(static_cast<std::uint8_t>(c.kind));
  json header{{"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"dataset_hash", c.dataset_hash},
              {"rng_seed", c.rng_seed},
              {"epochs_done", c.epochs_done}};
  const std::string h = header.dump();
  w.u32(static_cast<std::uint32_t>(h.size()));
  w.str(h);
  // Loss trace as raw f64 so it round-trips bit-exactly.
  w.u32(static_cast<std::uint32_t>(c.trace.epochs.size()));
  for (const auto& e : c.trace.epochs) {
    w.f64(e.train_mae);
    w.f64(e.train_kl);
    w.f64(e.val_mae);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.str(t.name);
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (int d : t.dims) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(t.data.begin(), t.data.end());
  }
  w.i64(c.adam.step);
  w.f64(c.adam.lr);
  w.f64(c.adam.beta1);
  w.f64(c.adam.beta2);
  w.f64(c.adam.eps);
  w.u64(c.adam.m.size());
  w.f32s(c.adam.m.begin(), c.adam.m.end());
  w.u64(c.adam.v.size());
  w.f32s(c.adam.v.begin(), c.adam.v.end());
  return w.buffer();
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || !std::equal(kCheckpointMagic, kCheckpointMagic + 4, bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "not a WCK1 checkpoint");
  }
  ByteReader r(bytes);
  r.set_context("checkpoint");
  r.str(4);
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported checkpoint version " + std::to_string(c.version));
  }
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw Error(ErrorCode::BadMagic, "unknown model kind tag");
  c.kind = static_cast<ModelKind>(kind);
  const std::string h = r.str(r.u32());
  try {
    const json header = json::parse(h);
    from_json_into(header.at("model"), c.model);
    from_json_into(header.at("train"), c.train);
    c.dataset_hash = header.at("dataset_hash").get<std::string>();
    c.rng_seed = header.at("rng_seed").get<std::uint64_t>();
    c.epochs_done = header.at("epochs_done").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, std::string("checkpoint header: ") + e.what());
  }
  if (c.model.kind != c.kind) throw Error(ErrorCode::ManifestMismatch, "checkpoint kind tag differs from header");
  const std::uint32_t ne = r.u32();
  c.trace.epochs.resize(ne);
  for (auto& e : c.trace.epochs) {
    e.train_mae = r.f64();
    e.train_kl = r.f64();
    e.val_mae = r.f64();
  }
  const std::uint32_t nt = r.u32();
  c.tensors.resize(nt);
  for (auto& t : c.tensors) {
    t.name = r.str(r.u16());
    r.set_context("checkpoint tensor '" + t.name + "'");
    t.dims.resize(r.u8());
    std::size_t n = 1;
    for (int& d : t.dims) {
      d = static_cast<int>(r.u32());
      n *= static_cast<std::size_t>(d);
    }
    if (!r.has(n * 4)) throw Error(ErrorCode::TruncatedFile, "checkpoint truncated in tensor '" + t.name + "'");
    t.data.resize(n);
    for (auto& v : t.data) v = r.f32();
  }
  r.set_context("checkpoint optimizer state");
  c.adam.step = r.i64();
  c.adam.lr = r.f64();
  c.adam.beta1 = r.f64();
  c.adam.beta2 = r.f64();
  c.adam.eps = r.f64();
  for (auto* buf : {&c.adam.m, &c.adam.v}) {
    const std::uint64_t n = r.u64();
    if (!r.has(n * 4)) throw Error(ErrorCode::TruncatedFile, "checkpoint truncated in optimizer state");
    buf->resize(n);
    for (auto& v : *buf) v = r.f32();
  }
  return c;
}

inline void write_checkpoint(const Checkpoint& c, const std::string& path) { write_file(path, encode_checkpoint(c)); }

inline Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace wisva::io
