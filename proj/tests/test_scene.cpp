#include <gtest/gtest.h>

#include "wisva/scene.hpp"

using namespace wisva;

namespace {

WarehouseScene blank(double w, double d, double res) {
  WarehouseScene s;
  s.width_m = w;
  s.depth_m = d;
  s.grid_res_m = res;
  s.materials = {air_material(), Material{"concrete", 5.24, std::nullopt}};
  return s;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Io;
}

}  // namespace

TEST(Layout, PlacesExactlyTheRequestedShelfCount) {
  LayoutSpec spec;
  const auto s = generate_layout(7, spec);
  EXPECT_EQ(s.shelves.size(), 19u);
  EXPECT_EQ(s.min_shelves, 19);
  EXPECT_EQ(s.materials.size(), 4u);
  EXPECT_EQ(s.materials[0].rel_permittivity, 1.0);
}

TEST(Layout, PureInSeed) {
  LayoutSpec spec;
  EXPECT_EQ(generate_layout(11, spec), generate_layout(11, spec));
  EXPECT_NE(generate_layout(11, spec).shelves, generate_layout(12, spec).shelves);
}

TEST(Layout, ShelvesStayInsideAndKeepAisles) {
  LayoutSpec spec;
  spec.width_m = 30;
  spec.depth_m = 30;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = generate_layout(seed, spec);
    for (std::size_t a = 0; a < s.shelves.size(); ++a) {
      const auto& x = s.shelves[a];
      EXPECT_GE(x.origin.x, 0.0);
      EXPECT_GE(x.origin.y, 0.0);
      EXPECT_LE(x.origin.x + x.width, 30.0 + 1e-9);
      EXPECT_LE(x.origin.y + x.depth, 30.0 + 1e-9);
      EXPECT_GE(x.width, spec.shelf_min_m - spec.snap_m);
      EXPECT_LE(x.width, spec.shelf_max_m + spec.snap_m);
      for (std::size_t b = a + 1; b < s.shelves.size(); ++b) {
        const auto& y = s.shelves[b];
        const double gx = std::max(y.origin.x - (x.origin.x + x.width), x.origin.x - (y.origin.x + y.width));
        const double gy = std::max(y.origin.y - (x.origin.y + x.depth), x.origin.y - (y.origin.y + y.depth));
        EXPECT_GE(std::max(gx, gy), spec.aisle_m - 1e-9) << "seed " << seed;
      }
    }
  }
}

TEST(Layout, ZeroShelvesGivesEmptyFloor) {
  LayoutSpec spec;
  spec.min_shelves = 0;
  EXPECT_TRUE(generate_layout(3, spec).shelves.empty());
}

TEST(Layout, ImpossibleDensityExhaustsAttempts) {
  LayoutSpec spec;
  spec.width_m = 10;
  spec.depth_m = 10;
  spec.min_shelves = 40;
  spec.max_attempts = 500;
  EXPECT_EQ(code_of([&] { generate_layout(1, spec); }), ErrorCode::PlacementExhausted);
}

TEST(Layout, RejectsShelfRangeLargerThanFloor) {
  LayoutSpec spec;
  spec.width_m = 4;
  spec.depth_m = 4;
  EXPECT_EQ(code_of([&] { generate_layout(1, spec); }), ErrorCode::InvalidConfig);
}

TEST(Scene, ValidateRejectsBadScenes) {
  auto s = blank(10, 10, 0.5);
  s.shelves.push_back(Shelf{{1, 1}, 2, 2, 1});
  EXPECT_NO_THROW(s.validate());

  auto overlap = s;
  overlap.shelves.push_back(Shelf{{2, 2}, 2, 2, 1});
  EXPECT_EQ(code_of([&] { overlap.validate(); }), ErrorCode::InvalidScene);

  auto outside = s;
  outside.shelves.push_back(Shelf{{9, 9}, 2, 2, 1});
  EXPECT_EQ(code_of([&] { outside.validate(); }), ErrorCode::InvalidScene);

  auto flat = s;
  flat.shelves.push_back(Shelf{{5, 5}, 0, 2, 1});
  EXPECT_EQ(code_of([&] { flat.validate(); }), ErrorCode::InvalidScene);

  auto tiny = blank(3, 3, 0.5);
  EXPECT_EQ(code_of([&] { tiny.validate(); }), ErrorCode::InvalidScene);

  auto bad_mat = s;
  bad_mat.shelves[0].material = 9;
  EXPECT_EQ(code_of([&] { bad_mat.validate(); }), ErrorCode::InvalidScene);

  auto low_eps = s;
  low_eps.materials.push_back(Material{"foam", 0.5, std::nullopt});
  EXPECT_EQ(code_of([&] { low_eps.validate(); }), ErrorCode::InvalidScene);

  auto too_few = s;
  too_few.min_shelves = 2;
  EXPECT_EQ(code_of([&] { too_few.validate(); }), ErrorCode::InvalidScene);
}

TEST(Scene, TouchingShelvesAreNotOverlapping) {
  auto s = blank(10, 10, 0.5);
  s.shelves.push_back(Shelf{{1, 1}, 2, 2, 1});
  s.shelves.push_back(Shelf{{3, 1}, 2, 2, 1});
  EXPECT_NO_THROW(s.validate());
}

TEST(Scene, VacuumPermittivityConstant) {
  EXPECT_DOUBLE_EQ(kVacuumPermittivity, 8.854e-12);
  EXPECT_DOUBLE_EQ(Material::kEpsilon0, 8.854e-12);
}

TEST(Rasterize, EmptySceneIsAllAir) {
  const auto g = rasterize_materials(blank(8, 8, 0.5));
  ASSERT_EQ(g.rows(), 16);
  ASSERT_EQ(g.cols(), 16);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) EXPECT_EQ(g.eps(i, j), 1.0);
}

TEST(Rasterize, CellCentersDecideMembership) {
  // Cell centers at 0.25, 0.75, ...; a 1x1 shelf at (1.5, 1.5) covers the
  // centers 1.75 and 2.25 on each axis.
  auto s = blank(4, 4, 0.5);
  s.shelves.push_back(Shelf{{1.5, 1.5}, 1, 1, 1});
  const auto g = rasterize_materials(s);
  int covered = 0;
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      const bool in = (i == 3 || i == 4) && (j == 3 || j == 4);
      EXPECT_EQ(g.ids(i, j), in ? 1 : 0) << i << "," << j;
      covered += g.ids(i, j) != 0;
    }
  }
  EXPECT_EQ(covered, 4);
  EXPECT_DOUBLE_EQ(g.eps(3, 3), 5.24);
}

TEST(Rasterize, HalfOpenFootprint) {
  // Shelf [2.5, 4.5) on a 1 m grid: centers 2.5 and 3.5 are in, 4.5 is out.
  auto s = blank(8, 8, 1.0);
  s.shelves.push_back(Shelf{{2.5, 2.5}, 2, 2, 1});
  const auto g = rasterize_materials(s);
  EXPECT_EQ(g.ids(2, 2), 1);
  EXPECT_EQ(g.ids(3, 3), 1);
  EXPECT_EQ(g.ids(4, 4), 0);
  EXPECT_EQ(g.ids(2, 4), 0);
  EXPECT_EQ(g.ids(1, 2), 0);
}

TEST(Rasterize, MatchesPerCellContainment) {
  LayoutSpec spec;
  spec.width_m = 20;
  spec.depth_m = 20;
  spec.grid_res_m = 0.25;
  spec.min_shelves = 8;
  spec.shelf_max_m = 4;
  const auto s = generate_layout(5, spec);
  const auto g = rasterize_materials(s);
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      const double cx = (j + 0.5) * 0.25, cy = (i + 0.5) * 0.25;
      MaterialId want = 0;
      for (const auto& sh : s.shelves)
        if (cx >= sh.origin.x && cx < sh.origin.x + sh.width && cy >= sh.origin.y && cy < sh.origin.y + sh.depth)
          want = sh.material;
      ASSERT_EQ(g.ids(i, j), want) << i << "," << j;
    }
  }
}

TEST(Sweep, CountsAndInset) {
  auto s = blank(60, 60, 0.5);
  const auto a = ap_sweep_positions(s, 5.0);
  ASSERT_EQ(a.size(), 144u);
  EXPECT_DOUBLE_EQ(a.front().x, 2.5);
  EXPECT_DOUBLE_EQ(a.front().y, 2.5);
  EXPECT_DOUBLE_EQ(a.back().x, 57.5);
  EXPECT_DOUBLE_EQ(a.back().y, 57.5);
  EXPECT_DOUBLE_EQ(a[1].x, 7.5);
  EXPECT_DOUBLE_EQ(a[1].y, 2.5);
  EXPECT_EQ(ap_sweep_positions(blank(30, 30, 0.5), 5.0).size(), 36u);
  EXPECT_EQ(ap_sweep_positions(blank(30, 30, 0.5), 2.5).size(), 144u);
}

TEST(Sweep, CarriesApDefaults) {
  ApDefaults d;
  d.height_m = 3.0;
  d.tx_power_dbm = 10.0;
  const auto a = ap_sweep_positions(blank(10, 10, 0.5), 5.0, d);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0].height, 3.0);
  EXPECT_EQ(a[0].tx_power_dbm, 10.0);
  EXPECT_EQ(a[0].carrier_hz, 60e9);
}

TEST(Sweep, Errors) {
  EXPECT_EQ(code_of([] { ap_sweep_positions(blank(10, 10, 0.5), 11.0); }), ErrorCode::EmptySweep);
  EXPECT_EQ(code_of([] { ap_sweep_positions(blank(10, 10, 0.5), 0.0); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { ap_sweep_positions(blank(10, 10, 0.5), -1.0); }), ErrorCode::InvalidConfig);
}

TEST(Shelf, DistanceAndContainment) {
  const Shelf s{{2, 2}, 2, 1, 1};
  EXPECT_TRUE(s.contains(2, 2));
  EXPECT_FALSE(s.contains(4, 2));
  EXPECT_FALSE(s.contains(2, 3));
  EXPECT_DOUBLE_EQ(s.distance_to(3, 2.5), 0.0);
  EXPECT_DOUBLE_EQ(s.distance_to(0, 2.5), 2.0);
  EXPECT_DOUBLE_EQ(s.distance_to(7, 7), 5.0);
}
