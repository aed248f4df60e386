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

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tduo/centerline.hpp"

namespace tduo {
namespace {

using testing::MapSpec;
using testing::make_scenario;

MapSpec corridor(int w, int h) {
  MapSpec m;
  m.width = w;
  m.height = h;
  m.resolution = 0.05;
  const double yc = 0.5 * h * 0.05;
  m.start = {{0.3, yc + 0.3, 0.0}, {0.3, yc - 0.3, 0.0}};
  m.end = {{w * 0.05 - 0.3, yc + 0.3, 0.0}, {w * 0.05 - 0.3, yc - 0.3, 0.0}};
  return m;
}

void expect_headings_follow_segments(const Centerline& c) {
  for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
    const Vec2 d = c.points[i + 1].position() - c.points[i].position();
    if (norm(d) > 1e-12) {
      EXPECT_NEAR(c.points[i].phi, std::atan2(d.y, d.x), 1e-12);
    }
  }
  EXPECT_EQ(c.points.back().phi, c.points[c.points.size() - 2].phi);
}

TEST(PlanCenterline, EmptyGridGivesStraightFreeSegment) {
  const Scenario sc = make_scenario(corridor(60, 30));
  const auto c = plan_centerline(sc, sc.grid, {}, {.num_points = 50});
  ASSERT_EQ(c.points.size(), 50u);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    EXPECT_NEAR(c.points[i].y, 0.75, 1e-12);
    EXPECT_NEAR(c.points[i].phi, 0.0, 1e-12);
    EXPECT_EQ(c.labels[i], kFree);
  }
  EXPECT_EQ(c.points.front().position(), sc.start.midpoint().position());
  EXPECT_EQ(c.points.back().position(), sc.end.midpoint().position());
}

TEST(PlanCenterline, CircleOnTheLineIsVisitedAndLabelled) {
  MapSpec m = corridor(80, 40);
  m.margin = 0.1;
  m.objects = {{{2.0, 1.0}, 0.025}, {{2.1, 1.05}, 0.025}};
  const Scenario sc = make_scenario(m);
  const Environment env = build_environment(sc);
  ASSERT_EQ(env.circles.size(), 1u);
  const auto c = plan_centerline(sc, env.inflated, env.circles, {.num_points = 80});
  int labelled = 0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const double d = distance(c.points[i].position(), env.circles[0].center);
    if (c.labels[i] == 0) {
      ++labelled;
      EXPECT_LE(d, env.circles[0].radius);
    } else {
      EXPECT_GT(d, env.circles[0].radius);
    }
  }
  EXPECT_GT(labelled, 0);
  expect_headings_follow_segments(c);
}

TEST(PlanCenterline, DetoursAroundObstaclesAndVisitsEveryCircle) {
  MapSpec m = corridor(100, 60);
  m.rows.assign(60, std::string(100, '.'));
  for (int r = 0; r < 40; ++r) m.rows[r][50] = '#';  // wall from the top
  m.margin = 0.1;
  m.objects = {{{1.5, 2.2}, 0.025}, {{3.5, 2.4}, 0.025}, {{4.0, 0.6}, 0.025}};
  const Scenario sc = make_scenario(m);
  const Environment env = build_environment(sc);
  const auto c = plan_centerline(sc, env.inflated, env.circles, {.num_points = 200});
  std::set<int> seen;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    EXPECT_NE(env.inflated.label_at(c.points[i].position()), Cell::kObstacle) << i;
    if (c.labels[i] != kFree) seen.insert(c.labels[i]);
  }
  EXPECT_EQ(seen.size(), env.circles.size());
  double spacing = 0.0;
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    spacing = std::max(spacing, distance(c.points[i - 1].position(), c.points[i].position()));
  }
  EXPECT_LE(spacing, sc.grid.resolution());
  expect_headings_follow_segments(c);
}

TEST(PlanCenterline, BlockedLegIsNamed) {
  MapSpec m = corridor(60, 30);
  m.rows.assign(30, std::string(60, '.'));
  for (int r = 0; r < 30; ++r) m.rows[r][30] = '#';
  const Scenario sc = make_scenario(m);
  try {
    plan_centerline(sc, sc.grid, {});
    FAIL();
  } catch (const PlanningError& e) {
    EXPECT_NE(std::string(e.what()).find("leg 0"), std::string::npos);
  }
}

TEST(Resample, PreservesEndpointsExactly) {
  const std::vector<Vec2> poly{{0.1, 0.2}, {0.7, 0.3}, {1.3, 1.9}};
  for (int n : {2, 3, 17, 200}) {
    const auto r = resample(poly, n);
    ASSERT_EQ(r.size(), static_cast<std::size_t>(n));
    EXPECT_EQ(r.front(), poly.front());
    EXPECT_EQ(r.back(), poly.back());
  }
}

TEST(Astar, FindsOctileShortestPathOnOpenGrid) {
  OccupancyGrid g(20, 20, 1.0);
  const auto path = astar(g, g.cell_center({0, 0}), g.cell_center({7, 3}));
  double len = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) len += distance(path[k - 1], path[k]);
  EXPECT_NEAR(len, 4.0 + 3.0 * std::sqrt(2.0), 1e-12);
}

// ---------------------------------------------------------------------------

Scenario scenario_between(Vec2 s, Vec2 e) {
  MapSpec m;
  m.width = 200;
  m.height = 200;
  m.resolution = 0.05;
  m.start = {{s.x, s.y + 0.3, 0.0}, {s.x, s.y - 0.3, 0.0}};
  m.end = {{e.x, e.y + 0.3, 0.0}, {e.x, e.y - 0.3, 0.0}};
  return make_scenario(m);
}

Circle circle_at(Vec2 c) { return Circle{c, 0.1, {}, {}}; }

TEST(OrderCircles, EmptyInput) {
  EXPECT_TRUE(order_circles(scenario_between({0.5, 5.0}, {9.0, 5.0}), {}).empty());
}

TEST(OrderCircles, CollinearCirclesInLineOrder) {
  const Scenario sc = scenario_between({0.5, 5.0}, {4.5, 5.0});
  const std::vector<Circle> circles{circle_at({3.5, 5.0}), circle_at({1.5, 5.0}), circle_at({2.5, 5.0})};
  EXPECT_EQ(order_circles(sc, circles), (std::vector<int>{1, 2, 0}));
}

double tour(const Scenario& sc, const std::vector<Circle>& c, const std::vector<int>& order) {
  std::vector<Vec2> centers;
  for (const auto& k : c) centers.push_back(k.center);
  return detail::open_tour_length(order, centers, sc.start.midpoint().position(),
                                  sc.end.midpoint().position());
}

TEST(OrderCircles, ExactForUpToTenCircles) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<> u(1.0, 9.0);
  const Scenario sc = scenario_between({0.5, 5.0}, {9.5, 5.0});
  for (int n = 1; n <= 7; ++n) {
    std::vector<Circle> circles;
    for (int k = 0; k < n; ++k) circles.push_back(circle_at({u(rng), u(rng)}));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do best = std::min(best, tour(sc, circles, perm));
    while (std::next_permutation(perm.begin(), perm.end()));
    const auto order = order_circles(sc, circles);
    EXPECT_NEAR(tour(sc, circles, order), best, 1e-12) << n;
  }
}

TEST(OrderCircles, HeuristicReturnsPermutationDeterministically) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<> u(1.0, 9.0);
  const Scenario sc = scenario_between({0.5, 5.0}, {9.5, 5.0});
  std::vector<Circle> circles;
  for (int k = 0; k < 14; ++k) circles.push_back(circle_at({u(rng), u(rng)}));
  const auto a = order_circles(sc, circles);
  const auto b = order_circles(sc, circles);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k < 14; ++k) EXPECT_EQ(sorted[k], k);
}

TEST(CenterlineCsv, HasHeaderAndLabels) {
  Centerline c;
  c.points = {{0, 0, 0}, {1, 0, 0}};
  c.labels = {kFree, 0};
  std::ostringstream os;
  write_centerline_csv(os, c);
  EXPECT_EQ(os.str(),
            "idx,x,y,phi,label\n0,0.000000000,0.000000000,0.000000000,FREE\n"
            "1,1.000000000,0.000000000,0.000000000,CIRCLE(0)\n");
}

}  // namespace
}  // namespace tduo
