#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wisva/error.hpp"
#include "wisva/grid.hpp"
#include "wisva/oracle.hpp"
#include "wisva/parallel.hpp"
#include "wisva/raycast.hpp"
#include "wisva/rng.hpp"
#include "wisva/scene.hpp"

namespace wisva {

enum class Quadrant : std::uint8_t { I = 1, II = 2, III = 3, IV = 4 };

inline const char* to_string(Quadrant q) {
  switch (q) {
    case Quadrant::I: return "I";
    case Quadrant::II: return "II";
    case Quadrant::III: return "III";
    case Quadrant::IV: return "IV";
  }
  return "?";
}

inline Quadrant parse_quadrant(const std::string& s) {
  if (s == "I" || s == "1") return Quadrant::I;
  if (s == "II" || s == "2") return Quadrant::II;
  if (s == "III" || s == "3") return Quadrant::III;
  if (s == "IV" || s == "4") return Quadrant::IV;
  throw Error(ErrorCode::InvalidConfig, "unknown quadrant '" + s + "'");
}

/// Quadrants around the floor center: I = (+x, +y), II = (-x, +y),
/// III = (-x, -y), IV = (+x, -y). Points on a center line go to the + side.
inline Quadrant quadrant_of(double x, double y, double cx, double cy) {
  const bool right = x >= cx;
  const bool top = y >= cy;
  if (right && top) return Quadrant::I;
  if (!right && top) return Quadrant::II;
  if (!right) return Quadrant::III;
  return Quadrant::IV;
}

inline Quadrant quadrant_of(const WarehouseScene& s, const ApPlacement& ap) {
  return quadrant_of(ap.x, ap.y, s.width_m / 2.0, s.depth_m / 2.0);
}

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error(ErrorCode::InvalidConfig, "unknown split '" + s + "'");
}

struct SampleMeta {
  int scene_index = 0;
  int ap_index = 0;
  Quadrant quadrant = Quadrant::I;
  ApPlacement ap;
  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

/// Channel order on disk and into the model.
enum Channel : int { kDistance = 0, kPermittivity = 1, kApMap = 2, kLos = 3, kNearestShelf = 4 };

struct SampleTensors {
  GridF distance;      ///< meters
  GridF permittivity;  ///< min-max scaled, air = 0
  GridF ap_map;
  std::optional<GridF> los;            ///< 1 = line of sight
  std::optional<GridF> nearest_shelf;  ///< meters, 0 inside racks
  GridF target;                        ///< normalized SINR in [0, 1]
  SampleMeta meta;

  int rows() const noexcept { return distance.rows(); }
  int cols() const noexcept { return distance.cols(); }
  bool has_aux() const noexcept { return los.has_value() && nearest_shelf.has_value(); }
  int channel_count() const noexcept { return has_aux() ? 5 : 3; }

  const GridF& channel(int c) const {
    switch (c) {
      case kDistance: return distance;
      case kPermittivity: return permittivity;
      case kApMap: return ap_map;
      case kLos: return los.value();
      case kNearestShelf: return nearest_shelf.value();
      default: throw Error(ErrorCode::ShapeMismatch, "channel index out of range");
    }
  }
  GridF& channel(int c) { return const_cast<GridF&>(static_cast<const SampleTensors&>(*this).channel(c)); }

  friend bool operator==(const SampleTensors&, const SampleTensors&) = default;
};

/// Normalization and tensor-building settings.
struct TensorConfig {
  int resolution = 64;
  double sweep_spacing_m = 5.0;
  double train_frac = 0.75;
  double ap_scale = 12.0;
  bool aux = true;
  double sinr_lo_db = -10.0;
  double sinr_hi_db = 60.0;
  friend bool operator==(const TensorConfig&, const TensorConfig&) = default;
};

struct Dataset {
  std::vector<SampleTensors> samples;
  std::vector<Split> split;
  int resolution = 0;
  double sinr_lo_db = -10.0;
  double sinr_hi_db = 60.0;
  std::uint64_t seed = 0;
  /// Effective generation config (JSON text), carried into the manifest.
  std::string config_json = "{}";

  std::size_t size() const noexcept { return samples.size(); }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
      if (split[i] == s) out.push_back(i);
    return out;
  }

  std::size_t count(Split s) const { return indices(s).size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// --- per-channel builders ---------------------------------------------------

inline void require_ap_inside(const ApPlacement& ap, int rows, int cols, double res_x, double res_y) {
  if (!(ap.x >= 0.0 && ap.x < cols * res_x && ap.y >= 0.0 && ap.y < rows * res_y)) {
    throw Error(ErrorCode::InvalidScene, "AP outside grid extent");
  }
}

inline Cell ap_cell(const ApPlacement& ap, int rows, int cols, double res_x, double res_y) {
  return containing_cell(ap.x, ap.y, rows, cols, res_x, res_y);
}

/// Planar Euclidean distance from each cell center to the AP, meters.
inline GridF distance_tensor(const ApPlacement& ap, int rows, int cols, double res_x, double res_y) {
  require_ap_inside(ap, rows, cols, res_x, res_y);
  GridF out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const double dy = (i + 0.5) * res_y - ap.y;
    for (int j = 0; j < cols; ++j) {
      const double dx = (j + 0.5) * res_x - ap.x;
      out(i, j) = static_cast<float>(std::sqrt(dx * dx + dy * dy));
    }
  }
  return out;
}

inline GridF distance_tensor(const ApPlacement& ap, int rows, int cols, double res_m) {
  return distance_tensor(ap, rows, cols, res_m, res_m);
}

/// Relative permittivity min-max scaled over the grid's material table.
inline GridF permittivity_tensor(const PermittivityGrid& grid) {
  double hi = 1.0;
  for (const auto& m : grid.materials) hi = std::max(hi, m.rel_permittivity);
  GridF out(grid.rows(), grid.cols(), 0.0f);
  if (hi <= 1.0) return out;
  for (int i = 0; i < grid.rows(); ++i)
    for (int j = 0; j < grid.cols(); ++j) out(i, j) = static_cast<float>((grid.eps(i, j) - 1.0) / (hi - 1.0));
  return out;
}

/// Scaled point source at the AP cell, zero elsewhere.
inline GridF ap_location_tensor(const ApPlacement& ap, int rows, int cols, double res_x, double res_y,
                                double scale = 12.0) {
  require_ap_inside(ap, rows, cols, res_x, res_y);
  GridF out(rows, cols, 0.0f);
  const Cell c = ap_cell(ap, rows, cols, res_x, res_y);
  out(c.row, c.col) = static_cast<float>(scale);
  return out;
}

/// Line-of-sight mask and nearest-rack distance on the output grid.
/// The ray is traced on the scene's fine raster; the rack the AP is mounted
/// above does not obstruct, and the AP's own cell is line of sight.
inline std::array<GridF, 2> aux_channels(const WarehouseScene& scene, const PermittivityGrid& fine,
                                         const ApPlacement& ap, int rows, int cols) {
  const double rx = scene.width_m / cols;
  const double ry = scene.depth_m / rows;
  require_ap_inside(ap, rows, cols, rx, ry);
  const Cell apc = ap_cell(ap, rows, cols, rx, ry);
  GridF los(rows, cols, 1.0f);
  GridF nearest(rows, cols, 0.0f);
  const double no_shelf = std::hypot(scene.width_m, scene.depth_m);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const Point c{(j + 0.5) * rx, (i + 0.5) * ry};
      if (!(i == apc.row && j == apc.col)) {
        const auto runs = ray_crossings(fine, c, Point{ap.x, ap.y}, RayOptions{true});
        los(i, j) = runs.empty() ? 1.0f : 0.0f;
      }
      double best = no_shelf;
      for (const auto& s : scene.shelves) best = std::min(best, s.distance_to(c.x, c.y));
      nearest(i, j) = static_cast<float>(best);
    }
  }
  return {std::move(los), std::move(nearest)};
}

inline std::array<GridF, 2> aux_channels(const WarehouseScene& scene, const ApPlacement& ap, int rows, int cols) {
  return aux_channels(scene, rasterize_materials(scene), ap, rows, cols);
}

// --- normalization and resizing -------------------------------------------

inline void check_range(double lo, double hi) {
  if (!(lo < hi)) throw Error(ErrorCode::DegenerateRange, "lo must be below hi");
}

inline float normalize_value(double db, double lo, double hi) {
  return static_cast<float>(std::clamp((db - lo) / (hi - lo), 0.0, 1.0));
}

inline double denormalize_value(double v, double lo, double hi) { return lo + v * (hi - lo); }

inline GridF normalize_sinr(const GridD& db, double lo = -10.0, double hi = 60.0) {
  check_range(lo, hi);
  GridF out(db.rows(), db.cols());
  for (std::size_t k = 0; k < db.size(); ++k) out.values()[k] = normalize_value(db.values()[k], lo, hi);
  return out;
}

inline GridF normalize_sinr(const SinrHeatmap& h, double lo = -10.0, double hi = 60.0) {
  return normalize_sinr(h.values, lo, hi);
}

template <typename T>
GridD denormalize_sinr(const Grid<T>& v, double lo, double hi) {
  check_range(lo, hi);
  GridD out(v.rows(), v.cols());
  for (std::size_t k = 0; k < v.size(); ++k) out.values()[k] = denormalize_value(v.values()[k], lo, hi);
  return out;
}

enum class ResizeMode { bilinear, nearest };

/// Bilinear uses corner-aligned sampling (output corners hit input corners).
/// Nearest uses cell-center sampling, so integer upscales replicate blocks.
template <typename T>
Grid<T> resize(const Grid<T>& in, int out_rows, int out_cols, ResizeMode mode = ResizeMode::bilinear) {
  if (out_rows < 1 || out_cols < 1) throw Error(ErrorCode::InvalidResolution, "resize target must be positive");
  if (in.empty()) throw Error(ErrorCode::ShapeMismatch, "resize of an empty grid");
  Grid<T> out(out_rows, out_cols);
  const int H = in.rows();
  const int W = in.cols();
  if (mode == ResizeMode::nearest) {
    for (int i = 0; i < out_rows; ++i) {
      const int si = std::min(H - 1, static_cast<int>((static_cast<long long>(i) * H) / out_rows));
      for (int j = 0; j < out_cols; ++j) {
        const int sj = std::min(W - 1, static_cast<int>((static_cast<long long>(j) * W) / out_cols));
        out(i, j) = in(si, sj);
      }
    }
    return out;
  }
  const double sy = out_rows > 1 ? static_cast<double>(H - 1) / (out_rows - 1) : 0.0;
  const double sx = out_cols > 1 ? static_cast<double>(W - 1) / (out_cols - 1) : 0.0;
  for (int i = 0; i < out_rows; ++i) {
    const double fy = i * sy;
    const int y0 = std::min(H - 1, static_cast<int>(std::floor(fy)));
    const int y1 = std::min(H - 1, y0 + 1);
    const double wy = fy - y0;
    for (int j = 0; j < out_cols; ++j) {
      const double fx = j * sx;
      const int x0 = std::min(W - 1, static_cast<int>(std::floor(fx)));
      const int x1 = std::min(W - 1, x0 + 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * in(y0, x0) + wx * in(y0, x1);
      const double bot = (1.0 - wx) * in(y1, x0) + wx * in(y1, x1);
      out(i, j) = static_cast<T>((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

template <typename T>
Grid<T> resize(const Grid<T>& in, int out, ResizeMode mode = ResizeMode::bilinear) {
  return resize(in, out, out, mode);
}

// --- sample and dataset assembly -------------------------------------------

/// Shared per-scene tensors: everything that does not depend on the AP.
struct SceneTensors {
  const WarehouseScene* scene = nullptr;
  OracleScene oracle;
  GridF permittivity;

  SceneTensors(const WarehouseScene& s, int resolution)
      : scene(&s),
        oracle(s),
        permittivity(permittivity_tensor(
            rasterize_materials(s, resolution, resolution, s.width_m / resolution, s.depth_m / resolution))) {}
};

/// Physics input channels for one placement; target left empty.
inline SampleTensors build_inputs(const SceneTensors& st, const ApPlacement& ap, const TensorConfig& cfg) {
  const WarehouseScene& scene = *st.scene;
  const int n = cfg.resolution;
  const double rx = scene.width_m / n;
  const double ry = scene.depth_m / n;
  SampleTensors s;
  s.distance = distance_tensor(ap, n, n, rx, ry);
  s.permittivity = st.permittivity;
  s.ap_map = ap_location_tensor(ap, n, n, rx, ry, cfg.ap_scale);
  if (cfg.aux) {
    auto aux = aux_channels(scene, st.oracle.raster, ap, n, n);
    s.los = std::move(aux[0]);
    s.nearest_shelf = std::move(aux[1]);
  }
  s.meta.ap = ap;
  s.meta.quadrant = quadrant_of(scene, ap);
  return s;
}

/// Oracle SINR for the placement at `rows x cols`, in dB.
inline SinrHeatmap oracle_heatmap(const SceneTensors& st, const ApPlacement& ap, const PropagationParams& p, int rows,
                                  int cols) {
  return sinr_heatmap(st.oracle, ap, {}, p, rows, cols);
}

inline SampleTensors build_sample(const SceneTensors& st, const ApPlacement& ap, const PropagationParams& p,
                                  const TensorConfig& cfg) {
  SampleTensors s = build_inputs(st, ap, cfg);
  s.target = normalize_sinr(oracle_heatmap(st, ap, p, cfg.resolution, cfg.resolution), cfg.sinr_lo_db,
                            cfg.sinr_hi_db);
  return s;
}

/// Number of training samples for a split fraction.
inline std::size_t train_count(std::size_t n, double train_frac) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_frac));
}

/// Seeded shuffle, first round(n * frac) indices train and the rest val.
inline std::vector<Split> assign_splits(std::size_t n, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error(ErrorCode::InvalidConfig, "train_frac must be in (0,1)");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x53504c4954ull));
  rng.shuffle(order);
  std::vector<Split> split(n, Split::val);
  const std::size_t nt = train_count(n, train_frac);
  for (std::size_t k = 0; k < nt; ++k) split[order[k]] = Split::train;
  return split;
}

/// Full sweep over every scene; samples are ordered by (scene, AP index).
inline Dataset build_dataset(const std::vector<WarehouseScene>& scenes, const TensorConfig& cfg,
                             const PropagationParams& p, std::uint64_t seed, const ApDefaults& ap_defaults = {}) {
  if (scenes.empty()) throw Error(ErrorCode::InvalidConfig, "no scenes");
  if (cfg.resolution < 8) throw Error(ErrorCode::InvalidResolution, "resolution below 8");
  check_range(cfg.sinr_lo_db, cfg.sinr_hi_db);

  std::vector<SceneTensors> per_scene;
  per_scene.reserve(scenes.size());
  struct Job {
    int scene;
    int ap_index;
    ApPlacement ap;
  };
  std::vector<Job> jobs;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    scenes[si].validate();
    per_scene.emplace_back(scenes[si], cfg.resolution);
    const auto sweep = ap_sweep_positions(scenes[si], cfg.sweep_spacing_m, ap_defaults);
    for (std::size_t k = 0; k < sweep.size(); ++k) jobs.push_back(Job{static_cast<int>(si), static_cast<int>(k), sweep[k]});
  }

  Dataset d;
  d.resolution = cfg.resolution;
  d.sinr_lo_db = cfg.sinr_lo_db;
  d.sinr_hi_db = cfg.sinr_hi_db;
  d.seed = seed;
  d.samples.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t k) {
    const Job& job = jobs[k];
    SampleTensors s = build_sample(per_scene[job.scene], job.ap, p, cfg);
    s.meta.scene_index = job.scene;
    s.meta.ap_index = job.ap_index;
    d.samples[k] = std::move(s);
  });
  d.split = assign_splits(d.samples.size(), cfg.train_frac, seed);
  return d;
}

}  // namespace wisva
