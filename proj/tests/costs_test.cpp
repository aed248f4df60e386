// Copyright 2026 The tduo Authors
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

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tduo/costs.hpp"

namespace tduo {
namespace {

CostParams params(double d_max = 2.0) { return CostParams{}.with_net_length(d_max); }

TEST(CostParams, DefaultsAndDerivedFields) {
  const CostParams p = params(2.32);
  EXPECT_EQ(p.t1, 300.0);
  EXPECT_EQ(p.t2, 10.0);
  EXPECT_EQ(p.K1, 1e7);
  EXPECT_EQ(p.kd1, 20.0);
  EXPECT_EQ(p.kd2, 15.0);
  EXPECT_EQ(p.b1, 110.0);
  EXPECT_EQ(p.b3, 1.0);
  EXPECT_EQ(p.dL_max, 0.05);
  EXPECT_EQ(p.dphi_max, 0.1);
  EXPECT_NEAR(p.d_min(), 0.232, 1e-15);
  EXPECT_NEAR(p.d_rest(), 2.0 * 2.32 / kPi, 1e-15);
  EXPECT_NEAR(p.gamma1(), kPi / (2 * (p.d_rest() - p.d_min())), 1e-15);
  EXPECT_NEAR(p.gamma2(), -p.gamma1() * p.d_rest(), 1e-15);
}

// ---------------------------------------------------------------------------

TEST(ObstacleCost, FreePointOutsideCirclesIsZero) {
  OccupancyGrid g(20, 20, 0.1);
  const std::vector<Circle> c{{{1.0, 1.0}, 0.3, {}, {}}};
  EXPECT_EQ(obstacle_cost({0.5, 0.5}, g, c, params()), 0.0);
}

TEST(ObstacleCost, CircleBoundaryIsContinuous) {
  const Circle c{{1.0, 1.0}, 0.5, {}, {}};
  EXPECT_EQ(circle_cost({1.5, 1.0}, c, params()), 0.0);
}

TEST(ObstacleCost, HalfRadiusValue) {
  const Circle c{{0.0, 0.0}, 0.5, {}, {}};
  EXPECT_NEAR(circle_cost({0.25, 0.0}, c, params()), 2e7, 1e-6);
  // Numeric oracle: integrate dJ/dD from D = r inwards.
  double acc = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double D = 0.5 - (k + 0.5) * 0.25 / n;
    acc += 1e7 * (1.0 / D - 2.0) / (D * D) * (0.25 / n);
  }
  EXPECT_NEAR(acc, 2e7, 2e7 * 1e-6);
}

TEST(ObstacleCost, OccupiedOrOutsideCellsCostK1) {
  OccupancyGrid g(20, 20, 0.1);
  g.set(3, 3, Cell::kObstacle);
  g.set(5, 5, Cell::kObject);
  EXPECT_EQ(obstacle_cost({0.35, 0.35}, g, {}, params()), 1e7);
  EXPECT_EQ(obstacle_cost({0.55, 0.55}, g, {}, params()), 1e7);
  EXPECT_EQ(obstacle_cost({-0.5, 0.5}, g, {}, params()), 1e7);
}

// ---------------------------------------------------------------------------

TEST(DistanceCost, IdenticalPointsCostNothing) {
  EXPECT_EQ(distance_cost({{1, 2, 0.3}, {1, 2, 0.3}, {1, 2, 0.3}}, 300, 10), 0.0);
}

TEST(DistanceCost, PythagoreanStep) {
  EXPECT_DOUBLE_EQ(distance_cost({{0, 0, 0}, {3, 4, 0}}, 300, 10), 1500.0);
}

TEST(DistanceCost, HeadingSeamIsWrapped) {
  const double j = distance_cost({{0, 0, 3.1}, {0, 0, -3.1}}, 300, 10);
  EXPECT_NEAR(j, 10 * (2 * kPi - 6.2), 1e-12);
  EXPECT_LT(j, 1.0);
}

// ---------------------------------------------------------------------------

TEST(ExpansionCost, ZeroAtRestLength) {
  for (double dm : {0.5, 1.45, 2.32, 3.0}) {
    const CostParams p = params(dm);
    EXPECT_EQ(expansion_cost(p.d_rest(), p), 0.0);
  }
}

TEST(ExpansionCost, ContinuousAtRestLength) {
  const CostParams p = params(2.32);
  for (double h : {1e-6, 1e-8, 1e-10}) {
    EXPECT_LT(expansion_cost(p.d_rest() - h, p), 1e-9);
    EXPECT_LT(expansion_cost(p.d_rest() + h, p), 1e-9);
  }
}

TEST(ExpansionCost, BarrierNearMinimum) {
  const CostParams p = params(2.32);
  const double d = p.d_min() + 1e-4 * (p.d_rest() - p.d_min());
  // Direct branch-1 evaluation.
  const double direct = p.kd1 * std::pow(std::tan(p.gamma1() * d + p.gamma2()), 2);
  EXPECT_GT(direct, 1e6);
  EXPECT_NEAR(expansion_cost(d, p), std::min(direct, p.K3), 1e-6 * direct);
}

TEST(ExpansionCost, OutsideRangeIsK3) {
  const CostParams p = params(2.32);
  for (double d : {0.0, 0.1, p.d_min() - 1e-9, p.d_max + 1e-9, 5.0}) {
    EXPECT_EQ(expansion_cost(d, p), 1e7) << d;
  }
  EXPECT_EQ(expansion_cost(p.d_max, p), 1e7);
  EXPECT_EQ(expansion_cost(p.d_min(), p), 1e7);
}

TEST(ExpansionCost, UpperBranchUsesPositiveBarrier) {
  const CostParams p = params(2.0);
  const double d = 0.5 * (p.d_rest() + p.d_max);
  const double e = d - p.d_rest(), g = d - p.d_max;
  EXPECT_NEAR(expansion_cost(d, p), 15 * e * e + e * e / (g * g), 1e-12);
  double prev = 0.0;
  for (double t = 0.01; t < 1.0; t += 0.01) {
    const double v = expansion_cost(p.d_rest() + t * (p.d_max - p.d_rest()), p);
    EXPECT_GE(v, prev);
    EXPECT_LE(v, p.K3);
    prev = v;
  }
}

// ---------------------------------------------------------------------------

TEST(DifferenceOperator, QuadraticFormMatchesStencil) {
  const DifferenceOperator op(7);
  EXPECT_TRUE(op.Q.isApprox(op.Q.transpose()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.Q);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  std::mt19937 rng(1);
  std::normal_distribution<> n;
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd x(7);
    for (int k = 0; k < 7; ++k) x(k) = n(rng);
    double s = 0.0;
    for (int i = 1; i < 6; ++i) s += std::pow(x(i - 1) - 2 * x(i) + x(i + 1), 2);
    EXPECT_NEAR(x.dot(op.Q * x), s, 1e-12);
  }
}

TEST(SmoothnessCost, StraightUniformLineIsZero) {
  PoseSeq s;
  for (int i = 0; i < 10; ++i) s.push_back({0.05 * i, 0.02 * i, 0.3});
  EXPECT_NEAR(smoothness_cost(s, {110, 110, 1}), 0.0, 1e-20);
}

TEST(SmoothnessCost, SingleKink) {
  EXPECT_DOUBLE_EQ(smoothness_cost({{0, 0, 0}, {0, 0, 0}, {1, 0, 0}}, {1, 0, 0}), 1.0);
}

TEST(SmoothnessCost, QuadraticColumn) {
  PoseSeq s;
  for (int i = 0; i < 5; ++i) s.push_back({double(i * i), 0, 0});
  EXPECT_DOUBLE_EQ(smoothness_cost(s, {1, 0, 0}), 12.0);
}

TEST(SmoothnessCost, MatchesMatrixForm) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<> u(-1, 1);
  PoseSeq s;
  for (int i = 0; i < 12; ++i) s.push_back({u(rng), u(rng), u(rng)});
  const DifferenceOperator op(12);
  Eigen::VectorXd cx(12), cy(12), cp(12);
  for (int i = 0; i < 12; ++i) {
    cx(i) = s[i].x;
    cy(i) = s[i].y;
    cp(i) = s[i].phi;
  }
  const double want = 110 * cx.dot(op.Q * cx) + 110 * cy.dot(op.Q * cy) + cp.dot(op.Q * cp);
  EXPECT_NEAR(smoothness_cost(s, {110, 110, 1}), want, 1e-9 * want);
}

// ---------------------------------------------------------------------------

TEST(TotalCost, StationaryDuoAtRestSeparationIsZero) {
  const CostParams p = params(2.0);
  OccupancyGrid g(60, 60, 0.1, {-3.0, -3.0});
  DuoTrajectory d;
  for (int i = 0; i < 6; ++i) {
    d.left.push_back({0.0, p.d_rest(), 0.0});
    d.right.push_back({0.0, 0.0, 0.0});
  }
  EXPECT_EQ(total_cost(d, 1, g, {}, p).total, 0.0);
  EXPECT_EQ(total_cost(d, 2, g, {}, p).total, 0.0);
  EXPECT_EQ(duo_total_cost(d, g, {}, p).total, 0.0);
}

DuoTrajectory straight_duo(int n, double sep, double y0 = 3.0) {
  DuoTrajectory d;
  for (int i = 0; i < n; ++i) {
    d.left.push_back({1.0 + 0.04 * i, y0 + 0.5 * sep, 0.0});
    d.right.push_back({1.0 + 0.04 * i, y0 - 0.5 * sep, 0.0});
  }
  return d;
}

TEST(TotalCost, PerturbingStraightOptimumIncreasesCost) {
  const CostParams p = params(2.0);
  OccupancyGrid g(100, 60, 0.1);
  const DuoTrajectory d = straight_duo(20, p.d_rest());
  const double base = total_cost(d, 1, g, {}, p).total;
  std::mt19937 rng(5);
  std::uniform_real_distribution<> u(-1e-3, 1e-3);
  for (int t = 0; t < 50; ++t) {
    DuoTrajectory q = d;
    const std::size_t i = 1 + rng() % 18;
    q.left[i].x += u(rng);
    q.left[i].y += u(rng);
    q.left[i].phi += u(rng);
    EXPECT_GT(total_cost(q, 1, g, {}, p).total, base);
  }
}

TEST(TotalCost, RigidTranslationInvariance) {
  const CostParams p = params(2.0);
  std::mt19937 rng(8);
  std::uniform_real_distribution<> u(-0.02, 0.02);
  DuoTrajectory d = straight_duo(30, 1.2);
  for (auto* s : {&d.left, &d.right})
    for (auto& q : *s) q = {q.x + u(rng), q.y + u(rng), q.phi + u(rng)};
  OccupancyGrid g(60, 60, 0.1);
  g.set(20, 45, Cell::kObstacle);
  d.left[10] = {2.05, 4.55, 0.0};  // inside the obstacle cell
  const std::vector<Circle> c{{{1.5, 3.0}, 0.7, {}, {}}};
  const Vec2 shift{3.0, -7.0};  // exactly representable grid-aligned shift
  OccupancyGrid gs(60, 60, 0.1, shift);
  gs.set(20, 45, Cell::kObstacle);
  DuoTrajectory ds = d;
  for (auto* s : {&ds.left, &ds.right})
    for (auto& q : *s) q = {q.x + shift.x, q.y + shift.y, q.phi};
  std::vector<Circle> cs = c;
  cs[0].center = cs[0].center + shift;
  const double a = duo_total_cost(d, g, c, p).total;
  const double b = duo_total_cost(ds, gs, cs, p).total;
  EXPECT_GT(a, 1e7);
  EXPECT_NEAR(a, b, 1e-9 * a);
}

// ---------------------------------------------------------------------------

TEST(CheckVelocity, BoundIsInclusive) {
  PoseSeq s;
  for (int i = 0; i < 5; ++i) s.push_back({0.05 * i, 0.0, 0.1 * i});
  EXPECT_TRUE(check_velocity(s, 0.05, 0.1).empty());
}

TEST(CheckVelocity, ReportsLongStep) {
  const PoseSeq s{{0, 0, 0}, {0.05, 0, 0}, {0.11, 0, 0}, {0.15, 0, 0}};
  const auto v = check_velocity(s, 0.05, 0.1);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].index, 1u);
}

TEST(CheckVelocity, ReportsSharpTurnAcrossSeam) {
  const PoseSeq s{{0, 0, 3.1}, {0, 0, -3.1}, {0, 0, -2.9}};
  const auto v = check_velocity(s, 0.05, 0.1);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].index, 1u);
}

// ---------------------------------------------------------------------------

TEST(Coverage, ParallelLinesCoverCenterBetweenThem) {
  OccupancyGrid g(50, 50, 0.1);
  const DuoTrajectory d = straight_duo(30, 0.6, 2.5);
  const std::vector<Circle> c{{{1.5, 2.5}, 0.1, {}, {}}};
  const auto r = coverage_and_enclosure(d, c, g);
  EXPECT_TRUE(r.uncovered.empty());
  EXPECT_TRUE(r.overlaps.empty());
  EXPECT_TRUE(r.bowties.empty());
}

TEST(Coverage, ObstacleInsideQuadIsReported) {
  OccupancyGrid g(50, 50, 0.1);
  const DuoTrajectory d = straight_duo(30, 0.6, 2.5);
  g.set(15, 25, Cell::kObstacle);  // [1.5, 1.6] x [2.5, 2.6]
  const auto r = coverage_and_enclosure(d, {}, g);
  std::set<std::size_t> quads;
  for (const auto& o : r.overlaps) quads.insert(o.quad);
  EXPECT_EQ(quads, oracle::brute_coverage(d, {}, g).overlapping);
  EXPECT_TRUE(quads.count(13) && quads.count(14));
  EXPECT_FALSE(quads.count(5));
}

TEST(Coverage, BowtieIsSplitAndFlagged) {
  DuoTrajectory d;
  d.left = {{0, 1, 0}, {1, 0, 0}};
  d.right = {{0, 0, 0}, {1, 1, 0}};
  OccupancyGrid g(30, 30, 0.1, {-1, -1});
  const std::vector<Circle> c{{{0.5, 0.2}, 0.1, {}, {}}, {{0.2, 0.5}, 0.1, {}, {}}};
  const auto r = coverage_and_enclosure(d, c, g);
  ASSERT_EQ(r.bowties.size(), 1u);
  // The bowtie lobes are the left and right triangles around (0.5, 0.5).
  EXPECT_EQ(r.uncovered, (std::vector<int>{0}));
}

TEST(Coverage, AgreesWithBruteForceOracle) {
  std::mt19937 rng(2024);
  int disagreements = 0;
  for (int t = 0; t < 50; ++t) {
    const auto in = oracle::random_instance(rng);
    const auto r = coverage_and_enclosure(in.duo, in.circles, in.grid);
    const auto v = oracle::brute_coverage(in.duo, in.circles, in.grid);
    std::set<std::size_t> quads;
    for (const auto& o : r.overlaps) quads.insert(o.quad);
    if (r.uncovered != v.uncovered || quads != v.overlapping) ++disagreements;
  }
  EXPECT_EQ(disagreements, 0);
}

// ---------------------------------------------------------------------------
// Gradients against central differences

TEST(Gradient, DistanceCost) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    PoseSeq s;
    for (int i = 0; i < 8; ++i) s.push_back({u(rng), u(rng), 0.4 * u(rng)});
    const Eigen::VectorXd x = oracle::to_vector(s);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    distance_cost_smooth(s, 300, 10, 0.0, &g);
    const auto f = [](const Eigen::VectorXd& y) { return distance_cost(oracle::to_poses(y), 300, 10); };
    EXPECT_LT(oracle::relative_error(g, oracle::numeric_gradient(f, x, 1e-6)), 1e-5);
  }
}

TEST(Gradient, ExpansionCostBranchInteriors) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<> um(1.0, 3.0), ut(0.05, 0.95);
  for (int t = 0; t < 100; ++t) {
    CostParams p = params(um(rng));
    const bool lower = t % 2 == 0;
    const double d = lower ? p.d_min() + ut(rng) * (p.d_rest() - p.d_min())
                           : p.d_rest() + ut(rng) * (p.d_max - p.d_rest());
    double gd = 0.0, gm = 0.0;
    expansion_barrier(d, p, &gd, &gm);
    const double h = 1e-7;
    const double nd = (expansion_barrier(d + h, p) - expansion_barrier(d - h, p)) / (2 * h);
    const double nm = (expansion_barrier(d, p.with_net_length(p.d_max + h)) -
                       expansion_barrier(d, p.with_net_length(p.d_max - h))) / (2 * h);
    Eigen::Vector2d a(gd, gm), n(nd, nm);
    EXPECT_LT(oracle::relative_error(a, n), 1e-5) << "d=" << d << " dmax=" << p.d_max;
  }
}

TEST(Gradient, SmoothnessCost) {
  std::mt19937 rng(13);
  std::uniform_real_distribution<> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    PoseSeq s;
    for (int i = 0; i < 9; ++i) s.push_back({u(rng), u(rng), 0.5 * u(rng)});
    const Eigen::VectorXd x = oracle::to_vector(s);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    smoothness_cost(s, {110, 110, 1}, &g);
    const auto f = [](const Eigen::VectorXd& y) { return smoothness_cost(oracle::to_poses(y), {110, 110, 1}); };
    EXPECT_LT(oracle::relative_error(g, oracle::numeric_gradient(f, x, 1e-5)), 1e-5);
  }
}

TEST(Gradient, CirclePotentialInterior) {
  std::mt19937 rng(14);
  std::uniform_real_distribution<> ur(0.1, 0.6), ua(-kPi, kPi), uf(0.3, 0.95);
  const CostParams p = params();
  for (int t = 0; t < 100; ++t) {
    const Circle c{{ua(rng), ua(rng)}, ur(rng), {}, {}};
    const double ang = ua(rng), rad = uf(rng) * c.radius;
    const Vec2 q = c.center + rad * Vec2{std::cos(ang), std::sin(ang)};
    Vec2 g;
    circle_cost(q, c, p, &g);
    const double h = 1e-7 * c.radius;
    const Eigen::Vector2d n((circle_cost(q + Vec2{h, 0}, c, p) - circle_cost(q - Vec2{h, 0}, c, p)) / (2 * h),
                            (circle_cost(q + Vec2{0, h}, c, p) - circle_cost(q - Vec2{0, h}, c, p)) / (2 * h));
    EXPECT_LT(oracle::relative_error(Eigen::Vector2d(g.x, g.y), n), 1e-5);
  }
}

// ---------------------------------------------------------------------------

TEST(CostBreakdownCsv, ListsEveryTerm) {
  OccupancyGrid g(50, 50, 0.1);
  const DuoTrajectory d = straight_duo(4, 1.2, 2.5);
  std::ostringstream os;
  write_cost_breakdown_csv(os, d, g, {}, params());
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("term,index,value\n", 0), 0u);
  EXPECT_NE(s.find("J_dist_left,2,"), std::string::npos);
  EXPECT_NE(s.find("J_obs_right,3,"), std::string::npos);
  EXPECT_NE(s.find("J_e,3,"), std::string::npos);
  EXPECT_NE(s.find("J_s_right,0,"), std::string::npos);
}

}  // namespace
}  // namespace tduo
