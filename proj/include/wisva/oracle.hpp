#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "wisva/error.hpp"
#include "wisva/grid.hpp"
#include "wisva/raycast.hpp"
#include "wisva/scene.hpp"

namespace wisva {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kMinDistanceM = 0.1;

struct PropagationParams {
  double carrier_hz = 60e9;
  double bandwidth_hz = 100e6;
  double noise_figure_db = 7.0;
  /// Extra path-loss exponent applied once the ray is obstructed.
  double nlos_exponent_bonus = 1.0;
  double tx_power_dbm = 20.0;
  /// Output clamp, keeps learning targets bounded.
  double sinr_min_db = -10.0;
  double sinr_max_db = 60.0;

  void validate() const {
    if (!(carrier_hz > 0.0) || !(bandwidth_hz > 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "carrier and bandwidth must be positive");
    }
    if (!(nlos_exponent_bonus >= 0.0)) throw Error(ErrorCode::InvalidConfig, "nlos_exponent_bonus < 0");
    if (!(sinr_min_db < sinr_max_db)) throw Error(ErrorCode::DegenerateRange, "SINR clamp range");
  }

  friend bool operator==(const PropagationParams&, const PropagationParams&) = default;
};

/// Free-space path loss, dB. Distances below 0.1 m are clamped.
inline double fspl_db(double carrier_hz, double distance_m) {
  const double d = std::max(distance_m, kMinDistanceM);
  return 20.0 * std::log10(4.0 * std::numbers::pi * d * carrier_hz / kSpeedOfLight);
}

/// Penetration loss of one slab at normal incidence: two interfaces, each
/// passing 1 - r^2 of the power, with r = (1 - sqrt(eps)) / (1 + sqrt(eps)).
inline double crossing_loss_db(const Material& m) {
  if (m.fixed_crossing_loss_db) return *m.fixed_crossing_loss_db;
  const double n = std::sqrt(m.rel_permittivity);
  const double r = (1.0 - n) / (1.0 + n);
  const double t = 1.0 - r * r;
  return -10.0 * std::log10(t * t);
}

/// Thermal noise over the bandwidth plus receiver noise figure, dBm.
inline double noise_floor_dbm(const PropagationParams& p) {
  return -174.0 + 10.0 * std::log10(p.bandwidth_hz) + p.noise_figure_db;
}

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

struct SinrHeatmap {
  GridD values;  ///< dB, row i spans y.
  double res_x_m = 1.0;
  double res_y_m = 1.0;
  ApPlacement ap;

  int rows() const noexcept { return values.rows(); }
  int cols() const noexcept { return values.cols(); }
};

/// Cell holding (x, y) under the closed-left/open-right rule.
inline Cell containing_cell(double x, double y, int rows, int cols, double res_x, double res_y) {
  const int j = std::clamp(static_cast<int>(std::floor(x / res_x)), 0, cols - 1);
  const int i = std::clamp(static_cast<int>(std::floor(y / res_y)), 0, rows - 1);
  return Cell{i, j};
}

/// Precomputed per-scene state so sweeps do not re-rasterize.
struct OracleScene {
  const WarehouseScene* scene = nullptr;
  PermittivityGrid raster;
  std::vector<double> loss_by_material;

  explicit OracleScene(const WarehouseScene& s) : scene(&s), raster(rasterize_materials(s)) {
    for (const auto& m : s.materials) loss_by_material.push_back(crossing_loss_db(m));
  }
};

/// Received power (dBm) at a point from one transmitter, and whether the
/// direct ray is obstructed.
inline double received_power_dbm(const OracleScene& os, const ApPlacement& tx, Point rx, const PropagationParams& p,
                                 int* crossings_out = nullptr, bool force_los = false) {
  const double dx = rx.x - tx.x;
  const double dy = rx.y - tx.y;
  const double d = std::max(std::sqrt(dx * dx + dy * dy + tx.height * tx.height), kMinDistanceM);
  double loss = 0.0;
  const int runs = force_los ? 0
                             : count_crossings(os.raster, rx, Point{tx.x, tx.y}, true,
                                               [&](MaterialId id) { return os.loss_by_material[id]; }, loss);
  if (crossings_out) *crossings_out = runs;
  double prx = tx.tx_power_dbm - fspl_db(tx.carrier_hz, d) - loss;
  if (runs > 0) prx -= p.nlos_exponent_bonus * 10.0 * std::log10(d);
  return prx;
}

/// SINR heatmap for `ap` on an out_rows x out_cols grid covering the floor,
/// with `others` acting as co-channel interferers. The receiver in the AP's
/// own cell is co-located with it and always has line of sight.
inline SinrHeatmap sinr_heatmap(const OracleScene& os, const ApPlacement& ap, const std::vector<ApPlacement>& others,
                                const PropagationParams& p, int out_rows, int out_cols) {
  const WarehouseScene& scene = *os.scene;
  if (out_rows < 8 || out_cols < 8) {
    throw Error(ErrorCode::InvalidResolution, "heatmap needs at least 8x8 cells");
  }
  if (!scene.inside(ap.x, ap.y)) throw Error(ErrorCode::InvalidScene, "AP outside floor");
  p.validate();

  SinrHeatmap h;
  h.values = GridD(out_rows, out_cols);
  h.res_x_m = scene.width_m / out_cols;
  h.res_y_m = scene.depth_m / out_rows;
  h.ap = ap;
  const double noise_mw = dbm_to_mw(noise_floor_dbm(p));
  const Cell apc = containing_cell(ap.x, ap.y, out_rows, out_cols, h.res_x_m, h.res_y_m);
  for (int i = 0; i < out_rows; ++i) {
    for (int j = 0; j < out_cols; ++j) {
      const Point rx{(j + 0.5) * h.res_x_m, (i + 0.5) * h.res_y_m};
      const bool own_cell = i == apc.row && j == apc.col;
      const double signal = received_power_dbm(os, ap, rx, p, nullptr, own_cell);
      double denom_mw = noise_mw;
      for (const auto& o : others) denom_mw += dbm_to_mw(received_power_dbm(os, o, rx, p));
      const double s = signal - 10.0 * std::log10(denom_mw);
      h.values(i, j) = std::clamp(s, p.sinr_min_db, p.sinr_max_db);
    }
  }
  return h;
}

inline SinrHeatmap sinr_heatmap(const WarehouseScene& scene, const ApPlacement& ap,
                                const std::vector<ApPlacement>& others, const PropagationParams& p, int out_res) {
  const OracleScene os(scene);
  return sinr_heatmap(os, ap, others, p, out_res, out_res);
}

}  // namespace wisva
