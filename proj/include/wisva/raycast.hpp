#pragma once

#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "wisva/scene.hpp"

namespace wisva {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// One contiguous run of non-air cells of a single material along a ray.
struct Crossing {
  MaterialId material = 0;
  int cells = 0;
  friend bool operator==(const Crossing&, const Crossing&) = default;
};

namespace detail {

inline double clamp_coord(double v, int n) {
  const double hi = std::nextafter(static_cast<double>(n), 0.0);
  return std::min(std::max(v, 0.0), hi);
}

}  // namespace detail

/// Grid traversal from a to b, both in cell units (x = column axis).
/// Visits every cell whose interior the segment passes through, plus the
/// endpoint cells. A segment passing exactly through a lattice corner steps
/// diagonally, since the two side cells are touched in a single point only.
template <typename Visit>
void traverse_cells(double ax, double ay, double bx, double by, int rows, int cols, Visit&& visit) {
  ax = detail::clamp_coord(ax, cols);
  bx = detail::clamp_coord(bx, cols);
  ay = detail::clamp_coord(ay, rows);
  by = detail::clamp_coord(by, rows);

  int ix = static_cast<int>(std::floor(ax));
  int iy = static_cast<int>(std::floor(ay));
  const int jx = static_cast<int>(std::floor(bx));
  const int jy = static_cast<int>(std::floor(by));

  const double dx = bx - ax;
  const double dy = by - ay;
  const int sx = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
  const int sy = dy > 0.0 ? 1 : (dy < 0.0 ? -1 : 0);
  const double adx = std::abs(dx);
  const double ady = std::abs(dy);

  for (;;) {
    visit(Cell{iy, ix});
    if (ix == jx && iy == jy) break;
    bool step_x = ix != jx && sx != 0;
    bool step_y = iy != jy && sy != 0;
    if (step_x && step_y) {
      // Distance to the next boundary on each axis; comparing ex/adx with
      // ey/ady by cross-multiplication keeps lattice-corner ties exact.
      const double ex = sx > 0 ? (ix + 1 - ax) : (ax - ix);
      const double ey = sy > 0 ? (iy + 1 - ay) : (ay - iy);
      const double lx = ex * ady;
      const double ly = ey * adx;
      if (lx < ly) step_y = false;
      else if (ly < lx) step_x = false;
    } else if (!step_x && !step_y) {
      // Degenerate: endpoint cell differs only along an axis the segment does not move on.
      if (ix != jx) step_x = true;
      if (iy != jy) step_y = true;
    }
    if (step_x) ix += (ix < jx ? 1 : -1);
    if (step_y) iy += (iy < jy ? 1 : -1);
  }
}

inline std::vector<Cell> traversed_cells(double ax, double ay, double bx, double by, int rows, int cols) {
  std::vector<Cell> cells;
  traverse_cells(ax, ay, bx, by, rows, cols, [&](Cell c) { cells.push_back(c); });
  return cells;
}

/// Groups a material-id sequence into obstacle runs; air separates runs.
inline std::vector<Crossing> runs_from_ids(const std::vector<MaterialId>& ids) {
  std::vector<Crossing> out;
  MaterialId prev = 0;
  for (MaterialId id : ids) {
    if (id != 0) {
      if (id == prev) ++out.back().cells;
      else out.push_back(Crossing{id, 1});
    }
    prev = id;
  }
  return out;
}

struct RayOptions {
  /// Drop the run that contains b's cell (AP mounted above its own rack).
  bool ignore_run_at_end = false;
};

/// Obstacle runs crossed by the segment a -> b, points in meters.
/// An empty result means line of sight.
inline std::vector<Crossing> ray_crossings(const PermittivityGrid& grid, Point a, Point b, RayOptions opt = {}) {
  if (a == b) return {};
  std::vector<MaterialId> ids;
  traverse_cells(a.x / grid.res_m, a.y / grid.res_y_m, b.x / grid.res_m, b.y / grid.res_y_m, grid.rows(), grid.cols(),
                 [&](Cell c) { ids.push_back(grid.ids(c.row, c.col)); });
  auto runs = runs_from_ids(ids);
  if (opt.ignore_run_at_end && !runs.empty() && !ids.empty() && ids.back() != 0) runs.pop_back();
  return runs;
}

/// Allocation-free variant used in per-cell loops: returns the number of
/// obstacle runs and sets loss_db to the sum of loss_of(material) over them.
template <typename LossFn>
int count_crossings(const PermittivityGrid& grid, Point a, Point b, bool ignore_run_at_end, LossFn&& loss_of,
                    double& loss_db) {
  loss_db = 0.0;
  if (a == b) return 0;
  int runs = 0;
  MaterialId prev = 0;
  double pending = 0.0;
  traverse_cells(a.x / grid.res_m, a.y / grid.res_y_m, b.x / grid.res_m, b.y / grid.res_y_m, grid.rows(), grid.cols(),
                 [&](Cell c) {
                   const MaterialId id = grid.ids(c.row, c.col);
                   if (id != 0 && id != prev) {
                     if (runs > 0) loss_db += pending;
                     ++runs;
                     pending = loss_of(id);
                   }
                   prev = id;
                 });
  if (runs == 0) return 0;
  if (ignore_run_at_end && prev != 0) return runs - 1;
  loss_db += pending;
  return runs;
}

}  // namespace wisva
