// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "p2rb/tessellation.hpp"

using namespace p2rb;

namespace {

std::vector<Point2> random_points(std::mt19937_64& rng, int n, int w, int h, bool integral) {
  std::uniform_real_distribution<double> ux(0, w - 1), uy(0, h - 1);
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) {
    Point2 p{ux(rng), uy(rng)};
    if (integral) p = {std::round(p.x), std::round(p.y)};
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

TEST(Voronoi, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> sz(8, 96), cnt(1, 30);
  for (int k = 0; k < 30; ++k) {
    const int w = sz(rng), h = sz(rng);
    // Integral sites create many exact ties.
    const auto pts = random_points(rng, cnt(rng), w, h, k % 2 == 0);
    EXPECT_EQ(voronoi_partition(pts, w, h).labels, oracle::voronoi_brute(pts, w, h)) << k;
  }
}

TEST(Voronoi, TieGoesToLowestIndex) {
  const std::vector<Point2> pts{{0, 0}, {4, 0}};
  const auto v = voronoi_partition(pts, 5, 1);
  EXPECT_EQ(v.labels(2, 0), 0);
  EXPECT_EQ(v.labels(3, 0), 1);
}

TEST(Voronoi, SiteOwnsItsPixel) {
  std::mt19937_64 rng(12);
  const auto pts = random_points(rng, 20, 64, 64, true);
  const auto v = voronoi_partition(pts, 64, 64);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int l = v.labels(static_cast<int>(pts[i].x), static_cast<int>(pts[i].y));
    EXPECT_EQ(l, v.representative[i]);
  }
}

TEST(Voronoi, DuplicatesMergeWithWarning) {
  const std::vector<Point2> pts{{3, 3}, {10, 10}, {3.2, 3.1}};
  const auto v = voronoi_partition(pts, 16, 16);
  EXPECT_EQ(v.representative[2], 0);
  ASSERT_EQ(v.warnings.size(), 1u);
  for (auto l : v.labels.data()) EXPECT_NE(l, 2);
}

TEST(Voronoi, Errors) {
  const std::vector<Point2> none;
  EXPECT_THROW(voronoi_partition(none, 8, 8), Error);
  const std::vector<Point2> out{{8, 2}};
  try {
    voronoi_partition(out, 8, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfBounds);
  }
}

TEST(Voronoi, SingleSiteHasNoRidges) {
  const std::vector<Point2> pts{{4, 4}};
  const auto v = voronoi_partition(pts, 9, 9);
  for (auto r : v.ridges.data()) EXPECT_EQ(r, 0);
}

TEST(Ridges, SeparateEveryPairOfCells) {
  std::mt19937_64 rng(13);
  const auto pts = random_points(rng, 15, 48, 40, false);
  const auto v = voronoi_partition(pts, 48, 40);
  // No 4-connected step between two non-ridge pixels changes label.
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 48; ++x) {
      if (v.ridges(x, y)) continue;
      if (x + 1 < 48 && !v.ridges(x + 1, y)) EXPECT_EQ(v.labels(x, y), v.labels(x + 1, y));
      if (y + 1 < 40 && !v.ridges(x, y + 1)) EXPECT_EQ(v.labels(x, y), v.labels(x, y + 1));
    }
}

TEST(Ridges, OnlyAtCellBorders) {
  std::mt19937_64 rng(14);
  const auto pts = random_points(rng, 10, 32, 32, false);
  const auto v = voronoi_partition(pts, 32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      if (!v.ridges(x, y)) continue;
      const bool border = (x + 1 < 32 && v.labels(x + 1, y) != v.labels(x, y)) ||
                          (y + 1 < 32 && v.labels(x, y + 1) != v.labels(x, y));
      EXPECT_TRUE(border);
    }
}
