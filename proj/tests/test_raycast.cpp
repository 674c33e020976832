#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "wisva/raycast.hpp"

using namespace wisva;

namespace {

std::vector<Cell> as_cells(const std::vector<oracle::CellHit>& hits) {
  std::vector<Cell> out;
  for (const auto& h : hits) out.push_back(Cell{h.row, h.col});
  return out;
}

PermittivityGrid strip_grid() {
  // Row 4 of an 8 x 10 grid: air, wood, wood, air, concrete, air, metal, metal, metal, air
  PermittivityGrid g;
  g.ids = Grid<MaterialId>(8, 10, 0);
  const MaterialId row[10] = {0, 2, 2, 0, 1, 0, 3, 3, 3, 0};
  for (int j = 0; j < 10; ++j) g.ids(4, j) = row[j];
  g.materials = {air_material(), Material{"concrete", 5.24, std::nullopt}, Material{"wood", 1.99, std::nullopt},
                 Material{"metal", 10.0, 15.0}};
  return g;
}

}  // namespace

TEST(Traverse, HorizontalRowVisitsEveryCell) {
  const auto c = traversed_cells(0.5, 2.5, 7.5, 2.5, 8, 8);
  ASSERT_EQ(c.size(), 8u);
  for (int j = 0; j < 8; ++j) EXPECT_EQ(c[j], (Cell{2, j}));
}

TEST(Traverse, ExactDiagonalStepsThroughCorners) {
  const auto c = traversed_cells(0.5, 0.5, 4.5, 4.5, 8, 8);
  ASSERT_EQ(c.size(), 5u);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(c[k], (Cell{k, k}));
}

TEST(Traverse, SameCell) {
  const auto c = traversed_cells(1.2, 1.3, 1.7, 1.9, 8, 8);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], (Cell{1, 1}));
}

TEST(Traverse, MatchesExactClippingOnRandomSegments) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.0, 16.0);
  for (int n = 0; n < 2000; ++n) {
    const double ax = u(gen), ay = u(gen), bx = u(gen), by = u(gen);
    const auto got = traversed_cells(ax, ay, bx, by, 16, 16);
    const auto want = as_cells(oracle::exact_cells(ax, ay, bx, by, 16, 16));
    ASSERT_EQ(got, want) << ax << "," << ay << " -> " << bx << "," << by;
  }
}

TEST(Traverse, MatchesExactClippingOnLatticeSegments) {
  // Integer and half-integer endpoints exercise corner ties and grid lines.
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> u(0, 31);
  for (int n = 0; n < 2000; ++n) {
    const double ax = u(gen) * 0.5, ay = u(gen) * 0.5, bx = u(gen) * 0.5, by = u(gen) * 0.5;
    const auto got = traversed_cells(ax, ay, bx, by, 16, 16);
    const auto want = as_cells(oracle::exact_cells(ax, ay, bx, by, 16, 16));
    ASSERT_EQ(got, want) << ax << "," << ay << " -> " << bx << "," << by;
  }
}

TEST(Crossings, RunsAlongAStrip) {
  const auto g = strip_grid();
  const auto r = ray_crossings(g, Point{0.5, 4.5}, Point{9.5, 4.5});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0], (Crossing{2, 2}));
  EXPECT_EQ(r[1], (Crossing{1, 1}));
  EXPECT_EQ(r[2], (Crossing{3, 3}));
}

TEST(Crossings, EndRunIgnoredOnlyWhenEndingInside) {
  const auto g = strip_grid();
  const auto into_metal = ray_crossings(g, Point{0.5, 4.5}, Point{7.5, 4.5}, RayOptions{true});
  ASSERT_EQ(into_metal.size(), 2u);
  const auto past = ray_crossings(g, Point{0.5, 4.5}, Point{9.5, 4.5}, RayOptions{true});
  EXPECT_EQ(past.size(), 3u);
}

TEST(Crossings, EmptyForCoincidentPointsAndAir) {
  const auto g = strip_grid();
  EXPECT_TRUE(ray_crossings(g, Point{3.5, 4.5}, Point{3.5, 4.5}).empty());
  EXPECT_TRUE(ray_crossings(g, Point{0.5, 1.5}, Point{9.5, 1.5}).empty());
}

TEST(Crossings, CountMatchesRunList) {
  const auto g = strip_grid();
  double loss = 0;
  const int n = count_crossings(
      g, Point{0.5, 4.5}, Point{9.5, 4.5}, false, [](MaterialId id) { return double(id); }, loss);
  EXPECT_EQ(n, 3);
  EXPECT_DOUBLE_EQ(loss, 2 + 1 + 3);
  const int m = count_crossings(
      g, Point{0.5, 4.5}, Point{7.5, 4.5}, true, [](MaterialId id) { return double(id); }, loss);
  EXPECT_EQ(m, 2);
  EXPECT_DOUBLE_EQ(loss, 2 + 1);
}

TEST(Crossings, MatchExactRunsOnRandomScenes) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 16.0);
  for (int sc = 0; sc < 20; ++sc) {
    const auto s = oracle::small_scene(sc, 16.0, 1.0, 6);
    const auto g = rasterize_materials(s);
    for (int r = 0; r < 50; ++r) {
      const Point a{u(gen), u(gen)}, b{u(gen), u(gen)};
      EXPECT_EQ(ray_crossings(g, a, b, RayOptions{true}), oracle::exact_runs(g, a, b, true));
      EXPECT_EQ(ray_crossings(g, a, b), oracle::exact_runs(g, a, b, false));
    }
  }
}
