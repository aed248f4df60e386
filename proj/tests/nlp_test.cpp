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

#include <gtest/gtest.h>

#include "tduo/nlp.hpp"

namespace tduo::nlp {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double e : v) x(k++) = e;
  return x;
}

TEST(Minimize, OneDimensionalQuadratic) {
  const Objective f = [](const Vector& x, Vector* g) {
    if (g) *g = vec({2.0 * (x(0) - 3.0)});
    return (x(0) - 3.0) * (x(0) - 3.0);
  };
  const auto r = minimize(f, vec({9.0}), vec({0.0}), vec({10.0}));
  EXPECT_NEAR(r.x(0), 3.0, 1e-8);
  EXPECT_TRUE(r.converged);
}

TEST(Minimize, ActiveBoundSatisfiesKkt) {
  // f = (x - 2)^2 + (y + 1)^2 + x y on x in [0, 5], y in [0, 5].
  // Unconstrained minimum has y < 0, so y = 0 is active; then x = 2.
  const Objective f = [](const Vector& x, Vector* g) {
    if (g) *g = vec({2.0 * (x(0) - 2.0) + x(1), 2.0 * (x(1) + 1.0) + x(0)});
    return std::pow(x(0) - 2.0, 2) + std::pow(x(1) + 1.0, 2) + x(0) * x(1);
  };
  Options opt;
  opt.grad_tol = 1e-10;
  const auto r = minimize(f, vec({4.0, 4.0}), vec({0.0, 0.0}), vec({5.0, 5.0}), opt);
  EXPECT_NEAR(r.x(0), 2.0, 1e-7);
  EXPECT_EQ(r.x(1), 0.0);
  // Stationarity: grad_x = 0, multiplier on y >= 0 equals grad_y = 2 + x = 4.
  Vector g(2);
  f(r.x, &g);
  EXPECT_NEAR(g(0), 0.0, 1e-6);
  EXPECT_NEAR(g(1), 4.0, 1e-6);
}

TEST(Minimize, RosenbrockFromStandardStart) {
  const Objective f = [](const Vector& x, Vector* g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    if (g) *g = vec({-2.0 * a - 400.0 * x(0) * b, 200.0 * b});
    return a * a + 100.0 * b * b;
  };
  Options opt;
  opt.grad_tol = 1e-10;
  opt.max_inner = 2000;
  const auto r = minimize(f, vec({-1.2, 1.0}), vec({-5.0, -5.0}), vec({5.0, 5.0}), opt);
  EXPECT_NEAR(r.x(0), 1.0, 1e-4);
  EXPECT_NEAR(r.x(1), 1.0, 1e-4);
}

TEST(Minimize, ReturnsInitialPointWhenNoImprovementPossible) {
  const Objective f = [](const Vector& x, Vector* g) {
    if (g) *g = vec({1.0});
    return x(0);
  };
  const auto r = minimize(f, vec({0.0}), vec({0.0}), vec({1.0}));
  EXPECT_EQ(r.x(0), 0.0);
}

TEST(Minimize, NanIsReported) {
  const Objective f = [](const Vector& x, Vector* g) {
    if (g) *g = vec({-1.0});
    return x(0) > 0.5 ? std::nan("") : -x(0);
  };
  EXPECT_THROW(minimize(f, vec({0.0}), vec({0.0}), vec({1.0})), NumericError);
}

TEST(Solve, InequalityConstrainedQuadratic) {
  // min (x-2)^2 + (y-2)^2 s.t. x + y <= 2  ->  (1, 1), multiplier 2.
  Problem p;
  p.x0 = vec({0.0, 0.0});
  p.lower = vec({-10.0, -10.0});
  p.upper = vec({10.0, 10.0});
  p.objective = [](const Vector& x, Vector* g) {
    if (g) *g = vec({2.0 * (x(0) - 2.0), 2.0 * (x(1) - 2.0)});
    return std::pow(x(0) - 2.0, 2) + std::pow(x(1) - 2.0, 2);
  };
  p.num_constraints = 1;
  p.constraints = [](const Vector& x, Vector& g, std::vector<JacEntry>* jac) {
    g(0) = x(0) + x(1) - 2.0;
    if (jac) jac->assign({{0, 0, 1.0}, {0, 1, 1.0}});
  };
  const auto r = solve(p);
  EXPECT_NEAR(r.x(0), 1.0, 1e-6);
  EXPECT_NEAR(r.x(1), 1.0, 1e-6);
  EXPECT_LE(r.violation, 1e-8);
}

TEST(Solve, NanConstraintIsNamed) {
  Problem p;
  p.x0 = vec({0.0});
  p.lower = vec({-1.0});
  p.upper = vec({1.0});
  p.objective = [](const Vector& x, Vector* g) {
    if (g) *g = vec({0.0});
    return x(0) * 0.0;
  };
  p.num_constraints = 2;
  p.constraints = [](const Vector&, Vector& g, std::vector<JacEntry>*) {
    g(0) = 0.0;
    g(1) = std::nan("");
  };
  try {
    solve(p);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("constraint 1"), std::string::npos);
  }
}

TEST(Solve, Deterministic) {
  Problem p;
  p.x0 = vec({-1.2, 1.0});
  p.lower = vec({-5.0, -5.0});
  p.upper = vec({5.0, 5.0});
  p.objective = [](const Vector& x, Vector* g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    if (g) *g = vec({-2.0 * a - 400.0 * x(0) * b, 200.0 * b});
    return a * a + 100.0 * b * b;
  };
  p.num_constraints = 1;
  p.constraints = [](const Vector& x, Vector& g, std::vector<JacEntry>* jac) {
    g(0) = x(0) * x(0) + x(1) * x(1) - 1.5;
    if (jac) jac->assign({{0, 0, 2.0 * x(0)}, {0, 1, 2.0 * x(1)}});
  };
  const auto a = solve(p), b = solve(p);
  EXPECT_EQ(a.x, b.x);
  EXPECT_LE(a.violation, 1e-8);
}

}  // namespace
}  // namespace tduo::nlp
