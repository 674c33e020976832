#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "wisva/oracle.hpp"

using namespace wisva;

namespace {

WarehouseScene floor_only(double extent, double res) {
  WarehouseScene s;
  s.width_m = extent;
  s.depth_m = extent;
  s.grid_res_m = res;
  s.materials = {air_material(), Material{"concrete", 5.24, std::nullopt}, Material{"wood", 1.99, std::nullopt},
                 Material{"metal", 10.0, 15.0}};
  return s;
}

}  // namespace

TEST(PathLoss, OneMeterAtSixtyGigahertz) {
  EXPECT_NEAR(fspl_db(60e9, 1.0), 68.0, 0.05);
  EXPECT_NEAR(fspl_db(60e9, 1.0), oracle::fspl_reference(60e9, 1.0), 1e-9);
}

TEST(PathLoss, DoublingDistanceAddsSixDecibels) {
  for (double d : {0.5, 1.0, 3.7, 20.0, 85.0})
    EXPECT_NEAR(fspl_db(60e9, 2 * d) - fspl_db(60e9, d), 6.02, 0.01) << d;
}

TEST(PathLoss, MatchesDefinitionAcrossRange) {
  for (double f : {2.4e9, 28e9, 60e9})
    for (double d : {0.1, 1.0, 10.0, 100.0}) EXPECT_NEAR(fspl_db(f, d), oracle::fspl_reference(f, d), 1e-9);
}

TEST(PathLoss, ClampsBelowTenCentimeters) {
  EXPECT_DOUBLE_EQ(fspl_db(60e9, 0.0), fspl_db(60e9, 0.1));
  EXPECT_DOUBLE_EQ(fspl_db(60e9, 0.05), fspl_db(60e9, 0.1));
  EXPECT_LT(fspl_db(60e9, 0.1), fspl_db(60e9, 0.11));
}

TEST(Noise, FloorForDefaultReceiver) {
  PropagationParams p;
  EXPECT_NEAR(noise_floor_dbm(p), -87.0, 0.01);
  p.bandwidth_hz = 1e6;
  p.noise_figure_db = 0.0;
  EXPECT_NEAR(noise_floor_dbm(p), -114.0, 1e-9);
}

TEST(CrossingLoss, NormalIncidenceSlab) {
  // eps 4: n = 2, r = -1/3, each interface passes 8/9 of the power.
  const double want = -20.0 * std::log10(8.0 / 9.0);
  EXPECT_NEAR(crossing_loss_db(Material{"x", 4.0, std::nullopt}), want, 1e-12);
  EXPECT_NEAR(crossing_loss_db(air_material()), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(crossing_loss_db(Material{"metal", 10.0, 15.0}), 15.0);
  EXPECT_GT(crossing_loss_db(Material{"c", 5.24, std::nullopt}), crossing_loss_db(Material{"w", 1.99, std::nullopt}));
}

TEST(Heatmap, EmptyFloorIsFreeSpace) {
  const auto s = floor_only(16, 0.25);
  ApPlacement ap;
  ap.x = 8.2;
  ap.y = 7.9;
  ap.height = 3.0;
  PropagationParams p;
  const auto h = sinr_heatmap(s, ap, {}, p, 16);
  ASSERT_EQ(h.rows(), 16);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      const double dx = j + 0.5 - ap.x, dy = i + 0.5 - ap.y;
      const double d = std::sqrt(dx * dx + dy * dy + ap.height * ap.height);
      const double want = std::clamp(ap.tx_power_dbm - oracle::fspl_reference(ap.carrier_hz, d) - noise_floor_dbm(p),
                                     p.sinr_min_db, p.sinr_max_db);
      EXPECT_NEAR(h.values(i, j), want, 1e-9) << i << "," << j;
    }
  }
}

TEST(Heatmap, ApCellHoldsTheMaximum) {
  const auto s = floor_only(16, 0.25);
  ApPlacement ap;
  ap.x = 3.3;
  ap.y = 12.6;
  const auto h = sinr_heatmap(s, ap, {}, PropagationParams{}, 16);
  const auto it = std::max_element(h.values.values().begin(), h.values.values().end());
  const auto k = static_cast<int>(it - h.values.values().begin());
  EXPECT_EQ(k / 16, 12);
  EXPECT_EQ(k % 16, 3);
}

TEST(Heatmap, WallAddsPenetrationAndExponentPenalty) {
  auto s = floor_only(16, 0.25);
  s.shelves.push_back(Shelf{{8, 0}, 1, 16, 1});
  ApPlacement ap;
  ap.x = 4.5;
  ap.y = 8.5;
  ap.height = 2.0;
  PropagationParams p;
  const auto h = sinr_heatmap(s, ap, {}, p, 16);
  const auto free = sinr_heatmap(floor_only(16, 0.25), ap, {}, p, 16);
  // Left of the wall: unobstructed.
  EXPECT_NEAR(h.values(8, 2), free.values(8, 2), 1e-9);
  // Right of the wall: one concrete crossing plus the exponent bonus.
  const double dx = 12.5 - ap.x;
  const double d = std::sqrt(dx * dx + ap.height * ap.height);
  const double want = free.values(8, 12) - crossing_loss_db(s.materials[1]) - 10.0 * std::log10(d);
  EXPECT_NEAR(h.values(8, 12), want, 1e-9);
}

TEST(Heatmap, OwnRackDoesNotBlock) {
  auto s = floor_only(16, 0.25);
  s.shelves.push_back(Shelf{{4, 4}, 4, 4, 3});
  ApPlacement ap;
  ap.x = 6.0;
  ap.y = 6.0;
  const auto h = sinr_heatmap(s, ap, {}, PropagationParams{}, 16);
  const auto free = sinr_heatmap(floor_only(16, 0.25), ap, {}, PropagationParams{}, 16);
  EXPECT_NEAR(h.values(1, 1), free.values(1, 1), 1e-9);
  EXPECT_NEAR(h.values(14, 14), free.values(14, 14), 1e-9);
}

TEST(Heatmap, InterfererLowersSinr) {
  const auto s = floor_only(16, 0.25);
  ApPlacement ap;
  ap.x = 4;
  ap.y = 4;
  ApPlacement other = ap;
  other.x = 12;
  other.y = 12;
  const auto alone = sinr_heatmap(s, ap, {}, PropagationParams{}, 16);
  const auto shared = sinr_heatmap(s, ap, {other}, PropagationParams{}, 16);
  for (std::size_t k = 0; k < alone.values.size(); ++k)
    EXPECT_LE(shared.values.values()[k], alone.values.values()[k] + 1e-12);
  EXPECT_LT(shared.values(12, 12), alone.values(12, 12) - 1.0);
}

TEST(Heatmap, ValuesStayInsideClamp) {
  LayoutSpec spec;
  spec.width_m = 30;
  spec.depth_m = 30;
  const auto s = generate_layout(4, spec);
  PropagationParams p;
  for (const auto& ap : ap_sweep_positions(s, 10.0)) {
    const auto h = sinr_heatmap(s, ap, {}, p, 16);
    for (double v : h.values.values()) {
      EXPECT_GE(v, p.sinr_min_db);
      EXPECT_LE(v, p.sinr_max_db);
    }
  }
}

TEST(Heatmap, MirrorSymmetry) {
  auto s = floor_only(16, 0.25);
  s.shelves = {Shelf{{3, 2}, 1, 9, 1}, Shelf{{6, 11}, 5, 1, 2}, Shelf{{11, 4}, 2, 3, 3}};
  ApPlacement ap;
  ap.x = 4.5;
  ap.y = 6.5;
  ap.height = 2.0;
  // Mirror about x = 8.
  auto m = s;
  for (auto& sh : m.shelves) sh.origin.x = 16 - sh.origin.x - sh.width;
  ApPlacement am = ap;
  am.x = 16 - ap.x;
  PropagationParams p;
  const auto h = sinr_heatmap(s, ap, {}, p, 16);
  const auto hm = sinr_heatmap(m, am, {}, p, 16);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) EXPECT_NEAR(hm.values(i, 15 - j), h.values(i, j), 1e-9) << i << "," << j;
}

TEST(Heatmap, Errors) {
  const auto s = floor_only(16, 0.25);
  ApPlacement out;
  out.x = 20;
  try {
    sinr_heatmap(s, out, {}, PropagationParams{}, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidScene);
  }
  ApPlacement ap;
  ap.x = 1;
  ap.y = 1;
  try {
    sinr_heatmap(s, ap, {}, PropagationParams{}, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidResolution);
  }
  PropagationParams bad;
  bad.sinr_min_db = 5;
  bad.sinr_max_db = 5;
  try {
    sinr_heatmap(s, ap, {}, bad, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateRange);
  }
}
