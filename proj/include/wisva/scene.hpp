#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wisva/error.hpp"
#include "wisva/grid.hpp"
#include "wisva/rng.hpp"

namespace wisva {

/// Permittivity of free space, F/m.
inline constexpr double kVacuumPermittivity = 8.854e-12;

struct Material {
  std::string name;
  double rel_permittivity = 1.0;
  /// Overrides the permittivity-derived penetration loss (metal racks).
  std::optional<double> fixed_crossing_loss_db;

  static constexpr double kEpsilon0 = kVacuumPermittivity;

  void validate() const {
    if (!(rel_permittivity >= 1.0) || !std::isfinite(rel_permittivity)) {
      throw Error(ErrorCode::InvalidScene, "material '" + name + "' has eps_r < 1");
    }
    if (fixed_crossing_loss_db && !(*fixed_crossing_loss_db >= 0.0)) {
      throw Error(ErrorCode::InvalidScene, "material '" + name + "' has negative fixed loss");
    }
  }

  friend bool operator==(const Material&, const Material&) = default;
};

inline Material air_material() { return Material{"air", 1.0, std::nullopt}; }

/// Dielectric constants are representative values; they are configuration.
inline std::vector<Material> default_shelf_materials() {
  return {
      Material{"concrete", 5.24, std::nullopt},
      Material{"wood", 1.99, std::nullopt},
      Material{"metal", 10.0, 15.0},
  };
}

/// Index into WarehouseScene::materials. Index 0 is always air.
using MaterialId = std::uint8_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned rack footprint occupying [x, x + width) x [y, y + depth).
struct Shelf {
  Point origin;
  double width = 0.0;
  double depth = 0.0;
  MaterialId material = 1;

  bool contains(double px, double py) const noexcept {
    return px >= origin.x && px < origin.x + width && py >= origin.y && py < origin.y + depth;
  }

  /// Planar distance from a point to the footprint; zero inside.
  double distance_to(double px, double py) const noexcept {
    const double dx = std::max({origin.x - px, 0.0, px - (origin.x + width)});
    const double dy = std::max({origin.y - py, 0.0, py - (origin.y + depth)});
    return std::hypot(dx, dy);
  }

  friend bool operator==(const Shelf&, const Shelf&) = default;
};

struct ApPlacement {
  double x = 0.0;
  double y = 0.0;
  double height = 15.0;
  double tx_power_dbm = 20.0;
  double carrier_hz = 60e9;
  bool omnidirectional = true;

  friend bool operator==(const ApPlacement&, const ApPlacement&) = default;
};

struct WarehouseScene {
  double width_m = 60.0;
  double depth_m = 60.0;
  double grid_res_m = 0.11;
  std::vector<Shelf> shelves;
  /// materials[0] is air.
  std::vector<Material> materials{air_material()};
  std::uint64_t rng_seed = 0;
  int min_shelves = 0;

  int grid_cols() const noexcept { return static_cast<int>(std::ceil(width_m / grid_res_m - 1e-9)); }
  int grid_rows() const noexcept { return static_cast<int>(std::ceil(depth_m / grid_res_m - 1e-9)); }

  bool inside(double x, double y) const noexcept {
    return x >= 0.0 && x < width_m && y >= 0.0 && y < depth_m;
  }

  const Material& material(MaterialId id) const { return materials.at(id); }

  void validate() const {
    if (!(grid_res_m > 0.0) || !(width_m > 0.0) || !(depth_m > 0.0)) {
      throw Error(ErrorCode::InvalidScene, "non-positive extent or resolution");
    }
    if (grid_cols() < 8 || grid_rows() < 8) {
      throw Error(ErrorCode::InvalidScene, "floor must span at least 8 cells per axis");
    }
    if (materials.empty() || materials[0].rel_permittivity != 1.0) {
      throw Error(ErrorCode::InvalidScene, "material 0 must be air");
    }
    for (const auto& m : materials) m.validate();
    if (static_cast<int>(shelves.size()) < min_shelves) {
      throw Error(ErrorCode::InvalidScene, "fewer shelves than the configured minimum");
    }
    for (std::size_t a = 0; a < shelves.size(); ++a) {
      const Shelf& s = shelves[a];
      if (!(s.width > 0.0) || !(s.depth > 0.0)) {
        throw Error(ErrorCode::InvalidScene, "shelf with non-positive size");
      }
      if (s.origin.x < 0.0 || s.origin.y < 0.0 || s.origin.x + s.width > width_m + 1e-9 ||
          s.origin.y + s.depth > depth_m + 1e-9) {
        throw Error(ErrorCode::InvalidScene, "shelf outside floor");
      }
      if (s.material == 0 || s.material >= materials.size()) {
        throw Error(ErrorCode::InvalidScene, "shelf references an invalid material");
      }
      for (std::size_t b = a + 1; b < shelves.size(); ++b) {
        const Shelf& t = shelves[b];
        const bool overlap = s.origin.x < t.origin.x + t.width && t.origin.x < s.origin.x + s.width &&
                             s.origin.y < t.origin.y + t.depth && t.origin.y < s.origin.y + s.depth;
        if (overlap) throw Error(ErrorCode::InvalidScene, "overlapping shelves");
      }
    }
  }

  friend bool operator==(const WarehouseScene&, const WarehouseScene&) = default;
};

struct ApDefaults {
  double height_m = 15.0;
  double tx_power_dbm = 20.0;
  double carrier_hz = 60e9;
  friend bool operator==(const ApDefaults&, const ApDefaults&) = default;
};

/// Parameters of the procedural layout sampler.
struct LayoutSpec {
  double width_m = 60.0;
  double depth_m = 60.0;
  double grid_res_m = 0.11;
  int min_shelves = 19;
  std::vector<Material> materials = default_shelf_materials();
  double shelf_min_m = 1.0;
  double shelf_max_m = 5.0;
  /// Clearance kept between racks so aisles stay open.
  double aisle_m = 1.0;
  /// Rack corners are snapped to this pitch.
  double snap_m = 0.1;
  int max_attempts = 10000;
  ApDefaults ap;

  friend bool operator==(const LayoutSpec&, const LayoutSpec&) = default;
};

/// Rejection-samples exactly spec.min_shelves non-overlapping racks.
/// Pure in (seed, spec).
inline WarehouseScene generate_layout(std::uint64_t seed, const LayoutSpec& spec) {
  if (spec.min_shelves < 0) throw Error(ErrorCode::InvalidConfig, "min_shelves < 0");
  if (!(spec.shelf_min_m > 0.0) || spec.shelf_max_m < spec.shelf_min_m ||
      spec.shelf_max_m > std::min(spec.width_m, spec.depth_m)) {
    throw Error(ErrorCode::InvalidConfig, "shelf size range does not fit the floor");
  }
  if (spec.materials.empty() && spec.min_shelves > 0) {
    throw Error(ErrorCode::InvalidConfig, "no shelf materials declared");
  }

  WarehouseScene scene;
  scene.width_m = spec.width_m;
  scene.depth_m = spec.depth_m;
  scene.grid_res_m = spec.grid_res_m;
  scene.rng_seed = seed;
  scene.min_shelves = spec.min_shelves;
  scene.materials = {air_material()};
  for (const auto& m : spec.materials) scene.materials.push_back(m);

  Rng rng(seed);
  const auto snap = [&](double v) { return spec.snap_m > 0.0 ? std::round(v / spec.snap_m) * spec.snap_m : v; };
  int attempts = 0;
  while (static_cast<int>(scene.shelves.size()) < spec.min_shelves) {
    if (attempts++ >= spec.max_attempts) {
      throw Error(ErrorCode::PlacementExhausted,
                  "placed " + std::to_string(scene.shelves.size()) + " of " +
                      std::to_string(spec.min_shelves) + " shelves in " + std::to_string(spec.max_attempts) +
                      " attempts");
    }
    Shelf s;
    s.width = std::max(spec.snap_m, snap(rng.uniform(spec.shelf_min_m, spec.shelf_max_m)));
    s.depth = std::max(spec.snap_m, snap(rng.uniform(spec.shelf_min_m, spec.shelf_max_m)));
    s.origin.x = snap(rng.uniform(0.0, spec.width_m - s.width));
    s.origin.y = snap(rng.uniform(0.0, spec.depth_m - s.depth));
    s.material = static_cast<MaterialId>(1 + rng.below(spec.materials.size()));
    if (s.origin.x < 0.0 || s.origin.y < 0.0 || s.origin.x + s.width > spec.width_m ||
        s.origin.y + s.depth > spec.depth_m) {
      continue;
    }
    bool clear = true;
    for (const auto& t : scene.shelves) {
      const double g = spec.aisle_m;
      if (s.origin.x < t.origin.x + t.width + g && t.origin.x < s.origin.x + s.width + g &&
          s.origin.y < t.origin.y + t.depth + g && t.origin.y < s.origin.y + s.depth + g) {
        clear = false;
        break;
      }
    }
    if (clear) scene.shelves.push_back(s);
  }
  scene.validate();
  return scene;
}

/// Material id per fine grid cell plus the table needed to interpret it.
struct PermittivityGrid {
  Grid<MaterialId> ids;
  std::vector<Material> materials;
  double res_m = 1.0;    ///< cell width (x)
  double res_y_m = 1.0;  ///< cell height (y)

  int rows() const noexcept { return ids.rows(); }
  int cols() const noexcept { return ids.cols(); }
  double eps(int i, int j) const { return materials[ids(i, j)].rel_permittivity; }

  GridD eps_grid() const {
    GridD out(rows(), cols());
    for (int i = 0; i < rows(); ++i)
      for (int j = 0; j < cols(); ++j) out(i, j) = eps(i, j);
    return out;
  }
};

/// Rasterizes shelves onto a rows x cols grid of the given cell size.
/// A cell belongs to a shelf when its center lies in the half-open footprint.
inline PermittivityGrid rasterize_materials(const WarehouseScene& scene, int rows, int cols, double res_x,
                                            double res_y) {
  PermittivityGrid g;
  g.ids = Grid<MaterialId>(rows, cols, 0);
  g.materials = scene.materials;
  g.res_m = res_x;
  g.res_y_m = res_y;
  for (const auto& s : scene.shelves) {
    const int j0 = std::max(0, static_cast<int>(std::ceil(s.origin.x / res_x - 0.5)) - 1);
    const int i0 = std::max(0, static_cast<int>(std::ceil(s.origin.y / res_y - 0.5)) - 1);
    for (int i = i0; i < rows; ++i) {
      const double cy = (i + 0.5) * res_y;
      if (cy >= s.origin.y + s.depth) break;
      for (int j = j0; j < cols; ++j) {
        const double cx = (j + 0.5) * res_x;
        if (cx >= s.origin.x + s.width) break;
        if (s.contains(cx, cy)) g.ids(i, j) = s.material;
      }
    }
  }
  return g;
}

inline PermittivityGrid rasterize_materials(const WarehouseScene& scene) {
  return rasterize_materials(scene, scene.grid_rows(), scene.grid_cols(), scene.grid_res_m, scene.grid_res_m);
}

/// AP grid inset by half a spacing from the walls, row-major (y outer, x inner).
inline std::vector<ApPlacement> ap_sweep_positions(const WarehouseScene& scene, double spacing_m,
                                                   const ApDefaults& ap = {}) {
  if (!(spacing_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "sweep spacing must be positive");
  const int nx = static_cast<int>(std::floor(scene.width_m / spacing_m + 1e-9));
  const int ny = static_cast<int>(std::floor(scene.depth_m / spacing_m + 1e-9));
  if (nx < 1 || ny < 1) {
    throw Error(ErrorCode::EmptySweep, "spacing " + std::to_string(spacing_m) + " m exceeds the floor extent");
  }
  std::vector<ApPlacement> out;
  out.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      ApPlacement p;
      p.x = (i + 0.5) * spacing_m;
      p.y = (j + 0.5) * spacing_m;
      p.height = ap.height_m;
      p.tx_power_dbm = ap.tx_power_dbm;
      p.carrier_hz = ap.carrier_hz;
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace wisva
