#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "wisva/error.hpp"
#include "wisva/hash.hpp"
#include "wisva/io/binary.hpp"
#include "wisva/models.hpp"
#include "wisva/oracle.hpp"
#include "wisva/scene.hpp"
#include "wisva/tensors.hpp"
#include "wisva/training.hpp"

namespace wisva {

/// Scenario settings shared by the eval subcommand and the acceptance run.
struct EvalConfig {
  int error_map_samples = 4;
  int denoise_lo_res = 16;
  int denoise_hi_res = 64;
  std::vector<int> shots{4, 16, 64};
  int finetune_epochs = 20;
  /// Sweep pitch for the held-out few-shot scene (denser, so 64 shots fit).
  double fewshot_sweep_m = 2.5;
  std::string test_quadrant = "IV";

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

/// Everything a pipeline run depends on; every field has a default.
struct RunConfig {
  std::uint64_t seed = 42;
  LayoutSpec scene;
  int num_scenes = 5;
  PropagationParams propagation;
  TensorConfig tensors;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace io {

using nlohmann::json;

namespace detail {

template <typename T>
void get_opt(const json& j, const char* key, T& v) {
  if (j.contains(key)) v = j.at(key).get<T>();
}

/// Rejects keys of `j` that the serialized form `known` does not have.
inline void check_keys(const json& j, const json& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config section '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + where + "." + key + "'");
  }
}

}  // namespace detail

inline json to_json(const Material& m) {
  json j{{"name", m.name}, {"rel_permittivity", m.rel_permittivity}};
  if (m.fixed_crossing_loss_db) j["fixed_crossing_loss_db"] = *m.fixed_crossing_loss_db;
  return j;
}

inline Material material_from_json(const json& j) {
  Material m;
  m.name = j.at("name").get<std::string>();
  m.rel_permittivity = j.at("rel_permittivity").get<double>();
  if (j.contains("fixed_crossing_loss_db")) m.fixed_crossing_loss_db = j.at("fixed_crossing_loss_db").get<double>();
  return m;
}

inline json to_json(const LayoutSpec& s) {
  json mats = json::array();
  for (const auto& m : s.materials) mats.push_back(to_json(m));
  return {{"width_m", s.width_m},
          {"depth_m", s.depth_m},
          {"grid_res_m", s.grid_res_m},
          {"min_shelves", s.min_shelves},
          {"materials", mats},
          {"shelf_min_m", s.shelf_min_m},
          {"shelf_max_m", s.shelf_max_m},
          {"aisle_m", s.aisle_m},
          {"snap_m", s.snap_m},
          {"max_attempts", s.max_attempts},
          {"ap_height_m", s.ap.height_m},
          {"ap_tx_power_dbm", s.ap.tx_power_dbm},
          {"ap_carrier_hz", s.ap.carrier_hz}};
}

inline void from_json_into(const json& j, LayoutSpec& s) {
  using detail::get_opt;
  get_opt(j, "width_m", s.width_m);
  get_opt(j, "depth_m", s.depth_m);
  get_opt(j, "grid_res_m", s.grid_res_m);
  get_opt(j, "min_shelves", s.min_shelves);
  if (j.contains("materials")) {
    s.materials.clear();
    for (const auto& m : j.at("materials")) s.materials.push_back(material_from_json(m));
  }
  get_opt(j, "shelf_min_m", s.shelf_min_m);
  get_opt(j, "shelf_max_m", s.shelf_max_m);
  get_opt(j, "aisle_m", s.aisle_m);
  get_opt(j, "snap_m", s.snap_m);
  get_opt(j, "max_attempts", s.max_attempts);
  get_opt(j, "ap_height_m", s.ap.height_m);
  get_opt(j, "ap_tx_power_dbm", s.ap.tx_power_dbm);
  get_opt(j, "ap_carrier_hz", s.ap.carrier_hz);
}

inline json to_json(const PropagationParams& p) {
  return {{"carrier_hz", p.carrier_hz},       {"bandwidth_hz", p.bandwidth_hz},
          {"noise_figure_db", p.noise_figure_db}, {"nlos_exponent_bonus", p.nlos_exponent_bonus},
          {"tx_power_dbm", p.tx_power_dbm},   {"sinr_min_db", p.sinr_min_db},
          {"sinr_max_db", p.sinr_max_db}};
}

inline void from_json_into(const json& j, PropagationParams& p) {
  using detail::get_opt;
  get_opt(j, "carrier_hz", p.carrier_hz);
  get_opt(j, "bandwidth_hz", p.bandwidth_hz);
  get_opt(j, "noise_figure_db", p.noise_figure_db);
  get_opt(j, "nlos_exponent_bonus", p.nlos_exponent_bonus);
  get_opt(j, "tx_power_dbm", p.tx_power_dbm);
  get_opt(j, "sinr_min_db", p.sinr_min_db);
  get_opt(j, "sinr_max_db", p.sinr_max_db);
}

inline json to_json(const TensorConfig& t) {
  return {{"resolution", t.resolution}, {"sweep_spacing_m", t.sweep_spacing_m}, {"train_frac", t.train_frac},
          {"ap_scale", t.ap_scale},     {"aux", t.aux},                         {"sinr_lo_db", t.sinr_lo_db},
          {"sinr_hi_db", t.sinr_hi_db}};
}

inline void from_json_into(const json& j, TensorConfig& t) {
  using detail::get_opt;
  get_opt(j, "resolution", t.resolution);
  get_opt(j, "sweep_spacing_m", t.sweep_spacing_m);
  get_opt(j, "train_frac", t.train_frac);
  get_opt(j, "ap_scale", t.ap_scale);
  get_opt(j, "aux", t.aux);
  get_opt(j, "sinr_lo_db", t.sinr_lo_db);
  get_opt(j, "sinr_hi_db", t.sinr_hi_db);
}

inline json to_json(const ModelConfig& m) {
  return {{"kind", to_string(m.kind)},
          {"resolution", m.resolution},
          {"latent_dim", m.latent_dim},
          {"branch_channels", m.branch_channels},
          {"trunk_channels", m.trunk_channels},
          {"hidden", m.hidden},
          {"aux", m.aux},
          {"distance_scale", m.distance_scale},
          {"nearest_shelf_scale", m.nearest_shelf_scale},
          {"logvar_init", m.logvar_init}};
}

inline void from_json_into(const json& j, ModelConfig& m) {
  using detail::get_opt;
  if (j.contains("kind")) m.kind = parse_model_kind(j.at("kind").get<std::string>());
  get_opt(j, "resolution", m.resolution);
  get_opt(j, "latent_dim", m.latent_dim);
  get_opt(j, "branch_channels", m.branch_channels);
  get_opt(j, "trunk_channels", m.trunk_channels);
  get_opt(j, "hidden", m.hidden);
  get_opt(j, "aux", m.aux);
  get_opt(j, "distance_scale", m.distance_scale);
  get_opt(j, "nearest_shelf_scale", m.nearest_shelf_scale);
  get_opt(j, "logvar_init", m.logvar_init);
}

inline json to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"lr", t.lr},
          {"beta_kl", t.beta_kl}, {"seed", t.seed},           {"checkpoint_every", t.checkpoint_every},
          {"cosine_lr", t.cosine_lr}, {"kl_warmup_epochs", t.kl_warmup_epochs}};
}

inline void from_json_into(const json& j, TrainConfig& t) {
  using detail::get_opt;
  get_opt(j, "epochs", t.epochs);
  get_opt(j, "batch_size", t.batch_size);
  get_opt(j, "lr", t.lr);
  get_opt(j, "beta_kl", t.beta_kl);
  get_opt(j, "seed", t.seed);
  get_opt(j, "checkpoint_every", t.checkpoint_every);
  get_opt(j, "cosine_lr", t.cosine_lr);
  get_opt(j, "kl_warmup_epochs", t.kl_warmup_epochs);
}

inline json to_json(const EvalConfig& e) {
  return {{"error_map_samples", e.error_map_samples}, {"denoise_lo_res", e.denoise_lo_res},
          {"denoise_hi_res", e.denoise_hi_res},       {"shots", e.shots},
          {"finetune_epochs", e.finetune_epochs},     {"fewshot_sweep_m", e.fewshot_sweep_m},
          {"test_quadrant", e.test_quadrant}};
}

inline void from_json_into(const json& j, EvalConfig& e) {
  using detail::get_opt;
  get_opt(j, "error_map_samples", e.error_map_samples);
  get_opt(j, "denoise_lo_res", e.denoise_lo_res);
  get_opt(j, "denoise_hi_res", e.denoise_hi_res);
  get_opt(j, "shots", e.shots);
  get_opt(j, "finetune_epochs", e.finetune_epochs);
  get_opt(j, "fewshot_sweep_m", e.fewshot_sweep_m);
  get_opt(j, "test_quadrant", e.test_quadrant);
}

inline json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"scene", to_json(c.scene)},
          {"num_scenes", c.num_scenes},
          {"propagation", to_json(c.propagation)},
          {"tensors", to_json(c.tensors)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"eval", to_json(c.eval)}};
}

/// Overlays `j` on `c`; keys absent from `j` keep their current values.
inline void from_json_into(const json& j, RunConfig& c) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    static const char* kKeys[] = {"seed", "scene", "num_scenes", "propagation", "tensors", "model", "train", "eval"};
    for (const auto& [key, _] : j.items()) {
      if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
        throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
      }
    }
    const json known = to_json(c);
    for (const char* section : {"scene", "propagation", "tensors", "model", "train", "eval"}) {
      if (j.contains(section)) detail::check_keys(j.at(section), known.at(section), section);
    }
    detail::get_opt(j, "seed", c.seed);
    detail::get_opt(j, "num_scenes", c.num_scenes);
    if (j.contains("scene")) from_json_into(j.at("scene"), c.scene);
    if (j.contains("propagation")) from_json_into(j.at("propagation"), c.propagation);
    if (j.contains("tensors")) from_json_into(j.at("tensors"), c.tensors);
    if (j.contains("model")) from_json_into(j.at("model"), c.model);
    if (j.contains("train")) from_json_into(j.at("train"), c.train);
    if (j.contains("eval")) from_json_into(j.at("eval"), c.eval);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
}

inline RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  from_json_into(j, c);
  return c;
}

inline RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text(path)); }

/// Stable fingerprint of a config (compact dump of the canonical JSON).
inline std::uint64_t config_hash(const json& j) { return fnv1a(j.dump()); }
inline std::uint64_t config_hash(const RunConfig& c) { return config_hash(to_json(c)); }

}  // namespace io
}  // namespace wisva
