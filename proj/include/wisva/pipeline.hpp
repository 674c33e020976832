#pragma once

#include <cstdint>
#include <vector>

#include "wisva/io/config.hpp"
#include "wisva/rng.hpp"
#include "wisva/scene.hpp"
#include "wisva/tensors.hpp"

namespace wisva {

/// Layout seed of scene `index` in a run. Indices >= num_scenes give scenes
/// never seen in training (used by the few-shot scenario).
inline std::uint64_t scene_seed(std::uint64_t run_seed, int index) {
  return derive_seed(run_seed, 0x5343454e45ull, static_cast<std::uint64_t>(index));
}

inline std::vector<WarehouseScene> make_scenes(const RunConfig& cfg) {
  if (cfg.num_scenes < 1) throw Error(ErrorCode::InvalidConfig, "num_scenes must be >= 1");
  std::vector<WarehouseScene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.num_scenes));
  for (int s = 0; s < cfg.num_scenes; ++s) scenes.push_back(generate_layout(scene_seed(cfg.seed, s), cfg.scene));
  return scenes;
}

/// Unseen scene for few-shot adaptation.
inline WarehouseScene make_heldout_scene(const RunConfig& cfg) {
  return generate_layout(scene_seed(cfg.seed, cfg.num_scenes), cfg.scene);
}

inline Dataset make_dataset(const RunConfig& cfg, const std::vector<WarehouseScene>& scenes) {
  Dataset d = build_dataset(scenes, cfg.tensors, cfg.propagation, cfg.seed, cfg.scene.ap);
  d.config_json = io::to_json(cfg).dump();
  return d;
}

inline Dataset make_dataset(const RunConfig& cfg) { return make_dataset(cfg, make_scenes(cfg)); }

/// Dense-sweep dataset of the held-out scene; every sample tagged val.
inline Dataset make_fewshot_dataset(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.tensors.sweep_spacing_m = cfg.eval.fewshot_sweep_m;
  Dataset d = make_dataset(c, {make_heldout_scene(cfg)});
  for (auto& s : d.split) s = Split::val;
  return d;
}

/// Model config consistent with the tensor settings.
inline ModelConfig model_config(const RunConfig& cfg, ModelKind kind) {
  ModelConfig m = cfg.model;
  m.kind = kind;
  m.resolution = cfg.tensors.resolution;
  m.aux = cfg.tensors.aux;
  return m;
}

}  // namespace wisva
