#pragma once

// Independent reference implementations used by the tests. None of these call
// into the library code they are meant to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "wisva/grid.hpp"
#include "wisva/raycast.hpp"
#include "wisva/scene.hpp"

namespace oracle {

struct CellHit {
  int row = 0;
  int col = 0;
  double t_mid = 0.0;  ///< parameter of the chord midpoint, for ordering
  double chord = 0.0;  ///< chord length in cell units
};

/// Parameter interval of the segment p + t d (t in [0,1]) inside [lo, hi] on
/// one axis; returns false when empty.
inline bool clip_axis(double p, double d, double lo, double hi, double& t0, double& t1) {
  if (d == 0.0) return p >= lo && p <= hi;
  double a = (lo - p) / d;
  double b = (hi - p) / d;
  if (a > b) std::swap(a, b);
  t0 = std::max(t0, a);
  t1 = std::min(t1, b);
  return t0 <= t1;
}

/// Every cell the segment a->b (cell units) passes through with positive
/// chord length, plus both endpoint cells, ordered along the segment.
/// A segment running exactly along a grid line belongs to the cell on the
/// upper side of that line (cells are half-open).
inline std::vector<CellHit> exact_cells(double ax, double ay, double bx, double by, int rows, int cols,
                                        double min_chord = 1e-9) {
  const double dx = bx - ax, dy = by - ay;
  const double len = std::hypot(dx, dy);
  std::vector<CellHit> hits;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double t0 = 0.0, t1 = 1.0;
      bool ok = true;
      if (dx == 0.0) {
        ok = std::floor(ax) == j || (ax == cols && j == cols - 1);
      } else {
        ok = clip_axis(ax, dx, j, j + 1, t0, t1);
      }
      if (ok) {
        if (dy == 0.0) {
          ok = std::floor(ay) == i || (ay == rows && i == rows - 1);
        } else {
          ok = clip_axis(ay, dy, i, i + 1, t0, t1);
        }
      }
      if (!ok) continue;
      const double chord = (t1 - t0) * len;
      if (chord > min_chord) hits.push_back(CellHit{i, j, 0.5 * (t0 + t1), chord});
    }
  }
  auto has = [&](int r, int c) {
    return std::any_of(hits.begin(), hits.end(), [&](const CellHit& h) { return h.row == r && h.col == c; });
  };
  const int ar = std::clamp(static_cast<int>(std::floor(ay)), 0, rows - 1);
  const int ac = std::clamp(static_cast<int>(std::floor(ax)), 0, cols - 1);
  const int br = std::clamp(static_cast<int>(std::floor(by)), 0, rows - 1);
  const int bc = std::clamp(static_cast<int>(std::floor(bx)), 0, cols - 1);
  if (!has(ar, ac)) hits.push_back(CellHit{ar, ac, -1.0, 0.0});
  if (!has(br, bc)) hits.push_back(CellHit{br, bc, 2.0, 0.0});
  std::sort(hits.begin(), hits.end(), [](const CellHit& a, const CellHit& b) { return a.t_mid < b.t_mid; });
  return hits;
}

/// Cells met by sampling the segment every `step` cell units (plus the end).
inline std::vector<wisva::Cell> sampled_cells(double ax, double ay, double bx, double by, int rows, int cols,
                                              double step) {
  const double len = std::hypot(bx - ax, by - ay);
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  std::vector<wisva::Cell> out;
  for (int k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / n;
    const double x = ax + t * (bx - ax), y = ay + t * (by - ay);
    const wisva::Cell c{std::clamp(static_cast<int>(std::floor(y)), 0, rows - 1),
                        std::clamp(static_cast<int>(std::floor(x)), 0, cols - 1)};
    if (out.empty() || !(out.back() == c)) out.push_back(c);
  }
  return out;
}

/// Obstacle runs over a material-id sequence (air = 0 separates runs).
inline std::vector<wisva::Crossing> runs(const std::vector<wisva::MaterialId>& ids, bool drop_end_run) {
  std::vector<wisva::Crossing> out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] == 0) continue;
    if (k > 0 && ids[k - 1] == ids[k] && !out.empty()) {
      ++out.back().cells;
    } else {
      out.push_back(wisva::Crossing{ids[k], 1});
    }
  }
  if (drop_end_run && !ids.empty() && ids.back() != 0 && !out.empty()) out.pop_back();
  return out;
}

/// Runs crossed by a metric segment on a raster, via exact clipping.
inline std::vector<wisva::Crossing> exact_runs(const wisva::PermittivityGrid& g, wisva::Point a, wisva::Point b,
                                               bool drop_end_run) {
  if (a.x == b.x && a.y == b.y) return {};
  const auto cells = exact_cells(a.x / g.res_m, a.y / g.res_y_m, b.x / g.res_m, b.y / g.res_y_m, g.rows(), g.cols());
  std::vector<wisva::MaterialId> ids;
  for (const auto& c : cells) ids.push_back(g.ids(c.row, c.col));
  return runs(ids, drop_end_run);
}

/// Distance from a point to an axis-aligned rectangle as the minimum over its
/// four edges (0 inside).
inline double rect_distance(const wisva::Shelf& s, double px, double py) {
  const double x0 = s.origin.x, x1 = s.origin.x + s.width;
  const double y0 = s.origin.y, y1 = s.origin.y + s.depth;
  if (px >= x0 && px <= x1 && py >= y0 && py <= y1) return 0.0;
  auto seg = [&](double ax, double ay, double bx, double by) {
    const double cx = std::clamp(px, std::min(ax, bx), std::max(ax, bx));
    const double cy = std::clamp(py, std::min(ay, by), std::max(ay, by));
    return std::hypot(px - cx, py - cy);
  };
  return std::min({seg(x0, y0, x1, y0), seg(x0, y1, x1, y1), seg(x0, y0, x0, y1), seg(x1, y0, x1, y1)});
}

/// Small random scene for brute-force comparisons.
inline wisva::WarehouseScene small_scene(std::uint64_t seed, double extent, double res, int shelves) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> size(0.5, extent / 4.0);
  wisva::WarehouseScene s;
  s.width_m = extent;
  s.depth_m = extent;
  s.grid_res_m = res;
  s.materials = {wisva::air_material(), wisva::Material{"concrete", 5.24, std::nullopt},
                 wisva::Material{"wood", 1.99, std::nullopt}, wisva::Material{"metal", 10.0, 15.0}};
  for (int tries = 0; tries < 1000 && static_cast<int>(s.shelves.size()) < shelves; ++tries) {
    wisva::Shelf sh;
    sh.width = std::round(size(gen) * 4.0) / 4.0 + 0.25;
    sh.depth = std::round(size(gen) * 4.0) / 4.0 + 0.25;
    std::uniform_real_distribution<double> ox(0.0, extent - sh.width), oy(0.0, extent - sh.depth);
    sh.origin = {std::round(ox(gen) * 4.0) / 4.0, std::round(oy(gen) * 4.0) / 4.0};
    sh.material = static_cast<wisva::MaterialId>(1 + gen() % 3);
    bool clear = true;
    for (const auto& t : s.shelves) {
      if (sh.origin.x < t.origin.x + t.width && t.origin.x < sh.origin.x + sh.width &&
          sh.origin.y < t.origin.y + t.depth && t.origin.y < sh.origin.y + sh.depth) {
        clear = false;
      }
    }
    if (clear && sh.origin.x + sh.width <= extent && sh.origin.y + sh.depth <= extent) s.shelves.push_back(sh);
  }
  return s;
}

/// Per-cell brute-force versions of the input channels on an n x n grid.
struct BruteTensors {
  wisva::GridF distance, permittivity, ap_map, los, nearest;
};

inline BruteTensors brute_tensors(const wisva::WarehouseScene& s, const wisva::ApPlacement& ap, int n,
                                  double ap_scale) {
  BruteTensors t;
  t.distance = wisva::GridF(n, n);
  t.permittivity = wisva::GridF(n, n);
  t.ap_map = wisva::GridF(n, n);
  t.los = wisva::GridF(n, n);
  t.nearest = wisva::GridF(n, n);
  const double rx = s.width_m / n, ry = s.depth_m / n;
  double eps_max = 1.0;
  for (const auto& m : s.materials) eps_max = std::max(eps_max, m.rel_permittivity);
  const wisva::PermittivityGrid fine = wisva::rasterize_materials(s);
  const int ap_col = static_cast<int>(std::floor(ap.x / rx));
  const int ap_row = static_cast<int>(std::floor(ap.y / ry));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double cx = rx * (0.5 + j), cy = ry * (0.5 + i);
      const double dx = cx - ap.x, dy = cy - ap.y;
      t.distance(i, j) = static_cast<float>(std::sqrt(dx * dx + dy * dy));
      double eps = 1.0;
      for (const auto& sh : s.shelves) {
        if (cx >= sh.origin.x && cx < sh.origin.x + sh.width && cy >= sh.origin.y && cy < sh.origin.y + sh.depth)
          eps = s.materials[sh.material].rel_permittivity;
      }
      t.permittivity(i, j) = eps_max > 1.0 ? static_cast<float>((eps - 1.0) / (eps_max - 1.0)) : 0.0f;
      const bool own = i == ap_row && j == ap_col;
      t.ap_map(i, j) = own ? static_cast<float>(ap_scale) : 0.0f;
      t.los(i, j) = own || exact_runs(fine, wisva::Point{cx, cy}, wisva::Point{ap.x, ap.y}, true).empty() ? 1.0f : 0.0f;
      double best = std::hypot(s.width_m, s.depth_m);
      for (const auto& sh : s.shelves) best = std::min(best, rect_distance(sh, cx, cy));
      t.nearest(i, j) = static_cast<float>(best);
    }
  }
  return t;
}

/// Free-space path loss straight from its definition, dB.
inline double fspl_reference(double f_hz, double d_m) {
  const double lambda = 299792458.0 / f_hz;
  const double ratio = 4.0 * 3.14159265358979323846 * d_m / lambda;
  return 10.0 * std::log10(ratio * ratio);
}

}  // namespace oracle
