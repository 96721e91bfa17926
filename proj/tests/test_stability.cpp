// Copyright 2026 The press2dyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "press2dyn/ingest.hpp"
#include "press2dyn/stability.hpp"

namespace press2dyn {
namespace {

constexpr std::size_t L = 0, R = 1;

FootPlacement placement(Point2 lh, Point2 lt, Point2 rh, Point2 rt) {
  FootPlacement p;
  p.feet[L] = {lh, lt};
  p.feet[R] = {rh, rt};
  return p;
}

// Feet side by side, 200 mm apart, pointing along +y.
FootPlacement standing() { return placement({-100, 0}, {-100, 299.72}, {100, 0}, {100, 299.72}); }

Point2 rotate(Point2 p, double a, Point2 about = {}) {
  const Point2 q = p - about;
  return about + Point2{q.x * std::cos(a) - q.y * std::sin(a), q.x * std::sin(a) + q.y * std::cos(a)};
}

FootPlacement moved(const FootPlacement& p, double a, Point2 t) {
  FootPlacement out = p;
  for (auto& f : out.feet) {
    f.heel = rotate(f.heel, a) + t;
    f.toe = rotate(f.toe, a) + t;
  }
  return out;
}

void expect_near(Point2 a, Point2 b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
}

GridD random_pressure(std::mt19937_64& rng, double active = 0.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GridD g{};
  for (double& v : g) v = u(rng) < active ? 3.0 + 40.0 * u(rng) : 2.0 * u(rng);
  return g;
}

// ---------------------------------------------------------------------------

TEST(CopSingleFoot, HandCentroids) {
  GridD g{};
  for (std::size_t r : {0u, 1u})
    for (std::size_t c : {0u, 1u}) g[grid_index(L, r, c)] = 10.0;
  const auto a = cop_single_foot(g, Foot::kLeft);
  ASSERT_TRUE(a.valid);
  EXPECT_NEAR(a.p.x, 0.5, 1e-12);
  EXPECT_NEAR(a.p.y, 0.5, 1e-12);

  GridD h{};
  h[grid_index(R, 0, 0)] = 6.0;
  h[grid_index(R, 1, 0)] = 3.0;
  const auto b = cop_single_foot(h, Foot::kRight);
  ASSERT_TRUE(b.valid);
  EXPECT_NEAR(b.p.x, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(b.p.y, 0.0, 1e-12);
  EXPECT_FALSE(cop_single_foot(h, Foot::kLeft).valid);
}

TEST(CopSingleFoot, ThresholdIsInclusive) {
  GridD g{};
  g[grid_index(L, 5, 5)] = 3.0;
  g[grid_index(L, 9, 9)] = 2.999;
  const auto c = cop_single_foot(g, Foot::kLeft);
  ASSERT_TRUE(c.valid);
  EXPECT_EQ(c.p.x, 5.0);
  GridD low{};
  low.fill(2.9);
  EXPECT_FALSE(cop_single_foot(low, Foot::kLeft).valid);
}

TEST(CopSingleFoot, ScaleEquivariantForFixedActiveSet) {
  std::mt19937_64 rng(1);
  const GridD g = random_pressure(rng);
  GridD s = g;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (g[i] < 3.0) s[i] = 0.0;
  GridD scaled = s;
  for (double& v : scaled) v *= 2.5;
  const auto a = cop_single_foot(s, Foot::kLeft), b = cop_single_foot(scaled, Foot::kLeft);
  expect_near(a.p, b.p, 1e-12);
}

TEST(RegisterFoot, CenterMapsToMidpointAndEndsToHeelToe) {
  const FootPose pose{{0, 0}, {0, 299.72}};
  expect_near(register_foot({kGridCenterRow, kGridCenterCol}, pose), {0, 149.86}, 1e-12);
  expect_near(register_foot({0, kGridCenterCol}, pose), {0, 299.72}, 1e-12);
  expect_near(register_foot({59, kGridCenterCol}, pose), {0, 0}, 1e-12);
  expect_near(register_foot({kGridCenterRow, kGridCenterCol + 1}, pose), {5.08, 149.86}, 1e-12);
  EXPECT_THROW(register_foot({0, 0}, FootPose{{1, 1}, {1, 1}}), DataError);
}

TEST(RegisterFoot, PreservesScaledDistancesAndRotates) {
  const FootPose pose{{10, 20}, {10, 319.72}};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ur(0, 59), uc(0, 20);
  const Point2 mid = (pose.heel + pose.toe) * 0.5;
  const FootPose turned{rotate(pose.heel, std::numbers::pi / 2, mid), rotate(pose.toe, std::numbers::pi / 2, mid)};
  for (int k = 0; k < 100; ++k) {
    const Point2 a{ur(rng), uc(rng)}, b{ur(rng), uc(rng)};
    EXPECT_NEAR(norm(register_foot(a, pose) - register_foot(b, pose)), kPrexelPitchMm * norm(a - b), 1e-9);
    expect_near(register_foot(a, turned), rotate(register_foot(a, pose), std::numbers::pi / 2, mid), 1e-9);
  }
}

TEST(CopCombined, SymmetricMidpointOneFootAndWeighting) {
  GridD g{};
  g[grid_index(L, 30, 10)] = 10.0;
  g[grid_index(R, 30, 10)] = 10.0;
  const auto place = standing();
  const Point2 lp = register_foot({30, 10}, place.feet[L]), rp = register_foot({30, 10}, place.feet[R]);
  expect_near(cop_combined(g, place).p, (lp + rp) * 0.5, 1e-12);

  GridD one = g;
  one[grid_index(R, 30, 10)] = 2.0;
  expect_near(cop_combined(one, place).p, lp, 1e-12);

  GridD w = g;
  w[grid_index(L, 30, 10)] = 20.0;
  expect_near(cop_combined(w, place).p, lp + (rp - lp) * (1.0 / 3.0), 1e-12);
  EXPECT_FALSE(cop_combined(GridD{}, place).valid);
}

TEST(CopCombined, EqualsForceWeightedPerFootCops) {
  std::mt19937_64 rng(3);
  const GridD g = random_pressure(rng);
  const auto place = standing();
  Point2 s;
  double total = 0.0;
  for (Foot f : {Foot::kLeft, Foot::kRight}) {
    double w = 0.0;
    for (std::size_t i = 0; i < kFootCells; ++i) {
      const double v = g[static_cast<std::size_t>(f) * kFootCells + i];
      if (v >= 3.0) w += v;
    }
    s = s + register_foot(cop_single_foot(g, f).p, place.feet[static_cast<std::size_t>(f)]) * w;
    total += w;
  }
  expect_near(cop_combined(g, place).p, s * (1.0 / total), 1e-9);
}

TEST(CopCombined, RigidMotionOfPlacementsMovesCopAndBos) {
  std::mt19937_64 rng(4);
  const GridD g = random_pressure(rng);
  const auto place = standing();
  const double a = 0.7;
  const Point2 t{123.0, -45.0};
  const auto other = moved(place, a, t);
  expect_near(cop_combined(g, other).p, rotate(cop_combined(g, place).p, a) + t, 1e-9);
  const auto h0 = bos_hull(g, place), h1 = bos_hull(g, other);
  ASSERT_FALSE(h0.degenerate || h1.degenerate);
  EXPECT_NEAR(polygon_area(h0.vertices), polygon_area(h1.vertices), 1e-6);
}

// ---------------------------------------------------------------------------

// Point p is a hull vertex iff it is not inside or on any triangle or segment
// spanned by the other distinct points.
std::set<std::pair<double, double>> brute_force_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::set<std::pair<double, double>> out;
  const std::size_t n = pts.size();
  auto on_segment = [](Point2 a, Point2 b, Point2 p) {
    return cross(a, b, p) == 0.0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
  };
  for (std::size_t p = 0; p < n; ++p) {
    bool inside = false;
    for (std::size_t i = 0; i < n && !inside; ++i)
      for (std::size_t j = i + 1; j < n && !inside; ++j) {
        if (i == p || j == p) continue;
        if (on_segment(pts[i], pts[j], pts[p])) inside = true;
        for (std::size_t k = j + 1; k < n && !inside; ++k) {
          if (k == p || cross(pts[i], pts[j], pts[k]) == 0.0) continue;
          const double d1 = cross(pts[i], pts[j], pts[p]), d2 = cross(pts[j], pts[k], pts[p]),
                       d3 = cross(pts[k], pts[i], pts[p]);
          const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
          if (!(neg && pos)) inside = true;
        }
      }
    if (!inside) out.insert({pts[p].x, pts[p].y});
  }
  return out;
}

TEST(ConvexHull, MatchesBruteForceOnRandomSmallSets) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> count(1, 10), grid(0, 5);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Point2> pts(static_cast<std::size_t>(count(rng)));
    const bool lattice = trial % 2 == 0;
    for (auto& p : pts) p = lattice ? Point2{double(grid(rng)), double(grid(rng))} : Point2{u(rng), u(rng)};
    const auto hull = convex_hull(pts);
    const auto oracle = brute_force_hull(pts);
    if (oracle.size() >= 3 || !hull.degenerate) {
      std::set<std::pair<double, double>> got;
      for (auto p : hull.vertices) got.insert({p.x, p.y});
      EXPECT_EQ(got, oracle) << "trial " << trial;
    }
    if (!hull.degenerate) {
      EXPECT_GT(polygon_area(hull.vertices), 0.0);
      for (std::size_t i = 0, n = hull.vertices.size(); i < n; ++i)
        EXPECT_GT(cross(hull.vertices[i], hull.vertices[(i + 1) % n], hull.vertices[(i + 2) % n]), 0.0);
    }
  }
}

TEST(ConvexHull, SquareCornersAndCollinearDegenerate) {
  const auto sq = convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.5, 0}});
  EXPECT_FALSE(sq.degenerate);
  EXPECT_EQ(sq.vertices.size(), 4u);
  EXPECT_EQ(polygon_area(sq.vertices), 1.0);
  EXPECT_TRUE(convex_hull({{0, 0}, {1, 1}, {2, 2}, {3, 3}}).degenerate);
  EXPECT_TRUE(convex_hull({{0, 0}, {1, 1}}).degenerate);
}

TEST(BosHull, FourActivePrexelsSpanARectangle) {
  GridD g{};
  for (auto [r, c] : {std::pair{10, 5}, {10, 15}, {40, 5}, {40, 15}}) g[grid_index(L, r, c)] = 8.0;
  const auto hull = bos_hull(g, standing());
  ASSERT_FALSE(hull.degenerate);
  EXPECT_EQ(hull.vertices.size(), 4u);
  EXPECT_NEAR(polygon_area(hull.vertices), (30 * 5.08) * (10 * 5.08), 1e-6);
  GridD line{};
  for (int r = 0; r < 60; ++r) line[grid_index(L, r, 3)] = 9.0;
  EXPECT_TRUE(bos_hull(line, standing()).degenerate);
}

TEST(PolygonIou, HandCasesExact) {
  const Polygon a = convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const Polygon b = convex_hull({{0.5, 0}, {1.5, 0}, {1.5, 1}, {0.5, 1}});
  const Polygon far = convex_hull({{5, 5}, {6, 5}, {6, 6}, {5, 6}});
  EXPECT_EQ(polygon_iou(a, a), 1.0);
  EXPECT_EQ(polygon_iou(a, far), 0.0);
  EXPECT_EQ(polygon_iou(a, b), 1.0 / 3.0);
  EXPECT_EQ(polygon_iou(a, Polygon{}), 0.0);
}

TEST(PolygonIou, SymmetricAndBounded) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 10);
  for (int k = 0; k < 200; ++k) {
    std::vector<Point2> p(8), q(8);
    for (auto& v : p) v = {u(rng), u(rng)};
    for (auto& v : q) v = {u(rng) + 3, u(rng)};
    const auto a = convex_hull(p), b = convex_hull(q);
    const double ab = polygon_iou(a, b), ba = polygon_iou(b, a);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_LT(ab, 1.0);
  }
}

// ---------------------------------------------------------------------------

// Coarse-to-fine grid search on the convex objective, finishing at 1e-3.
Point2 grid_search_median(const std::vector<Point2>& pts) {
  Point2 lo{1e300, 1e300}, hi{-1e300, -1e300};
  for (auto p : pts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  Point2 best = (lo + hi) * 0.5;
  double half = std::max(hi.x - lo.x, hi.y - lo.y);
  for (double res : {half / 50, 1e-1, 1e-2, 1e-3}) {
    double best_f = sum_distances(pts, best);
    const Point2 c = best;
    const int steps = static_cast<int>(std::ceil(std::max(half, 4 * res) / res));
    for (int i = -steps; i <= steps; ++i)
      for (int j = -steps; j <= steps; ++j) {
        const Point2 p{c.x + i * res, c.y + j * res};
        const double f = sum_distances(pts, p);
        if (f < best_f) {
          best_f = f;
          best = p;
        }
      }
    half = 20 * res;
  }
  return best;
}

TEST(GeometricMedian, HandCases) {
  expect_near(geometric_median({{0, 0}, {1, 0}, {2, 0}}), {1, 0}, 1e-9);
  expect_near(geometric_median({{0, 0}, {2, 0}, {2, 2}, {0, 2}}), {1, 1}, 1e-9);
  expect_near(geometric_median({{3, 4}}), {3, 4}, 0.0);
  // Majority at one point pins the median there.
  expect_near(geometric_median({{0, 0}, {0, 0}, {0, 0}, {5, 1}, {-2, 7}}), {0, 0}, 1e-9);
  EXPECT_THROW(geometric_median({}), DataError);
}

TEST(GeometricMedian, MatchesGridSearchOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point2> pts(20);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const Point2 m = geometric_median(pts);
    expect_near(m, grid_search_median(pts), 2e-3);
    Point2 mean;
    for (auto p : pts) mean = mean + p * (1.0 / 20);
    EXPECT_LE(sum_distances(pts, m), sum_distances(pts, mean));
  }
}

// ---------------------------------------------------------------------------

std::vector<CoP2D> cops(const std::vector<Point2>& pts) {
  std::vector<CoP2D> out;
  for (auto p : pts) out.push_back({p, true});
  return out;
}

TEST(OffsetStats, HandCase) {
  const auto gt = cops({{0, 0}, {0, 0}, {0, 0}});
  const auto pred = cops({{1, 0}, {3, 0}, {5, 0}});
  const auto s = cop_offset_stats(gt, pred);
  EXPECT_EQ(s.pairs, 3u);
  EXPECT_DOUBLE_EQ(s.dx_mean, 3.0);
  EXPECT_DOUBLE_EQ(s.dx_std, 2.0);
  EXPECT_DOUBLE_EQ(s.d, 3.0);
  EXPECT_DOUBLE_EQ(s.d_mean, 3.0);
  const auto r = cop_robust_stats(gt, pred);
  EXPECT_NEAR(r.dx_median, 3.0, 1e-9);
  EXPECT_DOUBLE_EQ(r.dx_rstd, 2.9652);
  EXPECT_DOUBLE_EQ(r.d_median, 3.0);
  EXPECT_DOUBLE_EQ(r.d_rstd, 2.9652);
}

TEST(OffsetStats, IdentityAndInvalidPairs) {
  std::vector<CoP2D> gt = cops({{1, 2}, {3, 4}, {5, 6}});
  const auto s = cop_offset_stats(gt, gt);
  EXPECT_EQ(s.d_mean, 0.0);
  EXPECT_EQ(s.dx_std, 0.0);
  const auto r = cop_robust_stats(gt, gt);
  EXPECT_EQ(r.d, 0.0);
  EXPECT_EQ(r.dx_rstd, 0.0);
  auto pred = gt;
  pred[1].valid = false;
  pred[0].p = {2, 2};
  EXPECT_EQ(cop_offset_stats(gt, pred).pairs, 2u);
  for (auto& c : pred) c.valid = false;
  EXPECT_THROW(cop_offset_stats(gt, pred), DataError);
  EXPECT_THROW(cop_robust_stats(gt, pred), DataError);
}

TEST(OffsetStats, RobustStdConsistentForNormalSamples) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  std::vector<double> v(100000);
  for (double& x : v) x = n01(rng);
  const double r = robust_std(v);
  EXPECT_GE(r, 0.98);
  EXPECT_LE(r, 1.02);
}

// ---------------------------------------------------------------------------

TEST(ThresholdSweep, ElevenThresholdsAndIdentity) {
  const auto th = default_sweep_thresholds();
  ASSERT_EQ(th.size(), 11u);
  EXPECT_EQ(th.front(), 1.0);
  EXPECT_EQ(th.back(), 31.0);
  std::mt19937_64 rng(9);
  std::vector<GridD> gt;
  std::vector<FootPlacement> place;
  for (int k = 0; k < 6; ++k) {
    gt.push_back(random_pressure(rng, 0.2));
    place.push_back(moved(standing(), 0.1 * k, {10.0 * k, 0}));
  }
  const auto rows = threshold_sweep(gt, gt, place, th, 2);
  ASSERT_EQ(rows.size(), 11u);
  for (const auto& r : rows) {
    ASSERT_GT(r.bos_pairs, 0u);
    EXPECT_NEAR(r.mean_iou, 1.0, 1e-12);
    EXPECT_EQ(r.d_mean, 0.0);
  }
  const auto above = threshold_sweep(gt, gt, place, {1000.0});
  EXPECT_EQ(above[0].cop_pairs, 0u);
  EXPECT_TRUE(std::isnan(above[0].d_mean));
  const auto csv = sweep_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
  EXPECT_EQ(sweep_csv(above), std::string(kSweepHeader) + "\n1000,6,0,,0,\n");
  EXPECT_EQ(threshold_sweep(gt, gt, place, th, 1).size(), 11u);
}

TEST(ThresholdSweep, ParallelMatchesSerial) {
  std::mt19937_64 rng(10);
  std::vector<GridD> gt, pred;
  std::vector<FootPlacement> place;
  for (int k = 0; k < 8; ++k) {
    gt.push_back(random_pressure(rng));
    pred.push_back(random_pressure(rng));
    place.push_back(standing());
  }
  const auto th = default_sweep_thresholds();
  EXPECT_EQ(sweep_csv(threshold_sweep(gt, pred, place, th, 1)), sweep_csv(threshold_sweep(gt, pred, place, th, 3)));
  EXPECT_EQ(stability_frames_csv(analyze_stability(gt, pred, place, 3.0, 1)),
            stability_frames_csv(analyze_stability(gt, pred, place, 3.0, 4)));
  EXPECT_THROW(threshold_range(5, 1, 1), UsageError);
}

// ---------------------------------------------------------------------------

void expect_orthonormal(const std::vector<std::vector<double>>& c, double tol) {
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t b = 0; b < c.size(); ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < c[a].size(); ++j) s += c[a][j] * c[b][j];
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, tol);
    }
}

TEST(Pca, RankOneDataHasOneComponent) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  std::vector<double> dir(30);
  for (double& v : dir) v = n01(rng);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 200; ++i) {
    const double s = n01(rng);
    std::vector<double> r(30);
    for (std::size_t j = 0; j < 30; ++j) r[j] = 5.0 + s * dir[j] + 1e-4 * n01(rng);
    rows.push_back(r);
  }
  const auto p = pca(rows, 5);
  EXPECT_GT(p.explained[0], 0.999);
  expect_orthonormal(p.components, 1e-8);
}

TEST(Pca, MatchesDenseEigendecomposition) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  const std::size_t d = 10, n = 400;
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) r[j] = n01(rng) * (1.0 + 0.6 * static_cast<double>(j)) + (j ? 0.3 * r[j - 1] : 0.0);
  const auto p = pca(rows, 5);
  expect_orthonormal(p.components, 1e-8);

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rows[i][j] - p.mean[j];
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  for (std::size_t c = 0; c < 5; ++c) {
    const auto col = static_cast<Eigen::Index>(d - 1 - c);
    EXPECT_NEAR(p.eigenvalues[c], es.eigenvalues()(col), 1e-6 * es.eigenvalues()(col));
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += p.components[c][j] * es.eigenvectors()(static_cast<Eigen::Index>(j), col);
    for (std::size_t j = 0; j < d; ++j)
      EXPECT_NEAR(p.components[c][j], std::copysign(1.0, dot) * es.eigenvectors()(static_cast<Eigen::Index>(j), col), 1e-6);
  }
  EXPECT_NEAR(p.explained[0], es.eigenvalues()(d - 1) / es.eigenvalues().sum(), 1e-9);
}

TEST(Pca, PressureMapsRespectFootmask) {
  const Take t = generate_synthetic_take(3, 120, reference_subject(1));
  const auto p = pressure_pca(t.pressures, t.footmask, 5);
  ASSERT_EQ(p.components.size(), 5u);
  double total = 0.0;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (!t.footmask.valid[i]) {
      EXPECT_EQ(p.mean[i], 0.0);
      for (const auto& c : p.components) EXPECT_EQ(c[i], 0.0);
    }
  for (std::size_t k = 0; k < 5; ++k) {
    total += p.explained[k];
    if (k) {
      EXPECT_LE(p.explained[k], p.explained[k - 1] + 1e-9);
    }
  }
  EXPECT_LE(total, 1.0 + 1e-9);
}

TEST(MeanPressureDiff, SymmetricWithZeroDiagonal) {
  auto takes = generate_synthetic_cohort(4, 40, 3);
  takes.push_back(generate_synthetic_take(99, 20, takes[0].subject));
  const auto m = mean_pressure_diff_matrix(takes);
  ASSERT_EQ(m.subjects.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < kGridCells; ++c) {
        EXPECT_EQ(m.diffs[i][j][c], m.diffs[j][i][c]);
        if (i == j) {
          EXPECT_EQ(m.diffs[i][j][c], 0.0);
        }
      }
}

}  // namespace
}  // namespace press2dyn
