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

// Independent reference implementations used by unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "tduo/costs.hpp"

namespace tduo::oracle {

/// Winding number of a closed polygon around p (self-intersecting polygons
/// allowed).
inline int winding_number(Vec2 p, const std::vector<Vec2>& poly) {
  int wn = 0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Vec2 a = poly[k];
    const Vec2 b = poly[(k + 1) % poly.size()];
    const double side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    if (a.y <= p.y) {
      if (b.y > p.y && side > 0) ++wn;
    } else if (b.y <= p.y && side < 0) {
      --wn;
    }
  }
  return wn;
}

inline bool on_segment(Vec2 p, Vec2 a, Vec2 b, double tol = 1e-12) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  if (len == 0.0) return std::hypot(p.x - a.x, p.y - a.y) <= tol;
  const double t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
  const double c = std::abs((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / len;
  return t >= -tol && t <= 1 + tol && c <= tol;
}

inline bool in_quad(Vec2 p, const std::vector<Vec2>& q) {
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (on_segment(p, q[k], q[(k + 1) % q.size()])) return true;
  }
  return winding_number(p, q) != 0;
}

/// Liang-Barsky clip of segment ab against a closed box.
inline bool clip_segment(Vec2 a, Vec2 b, Vec2 lo, Vec2 hi) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - lo.x, hi.x - a.x, a.y - lo.y, hi.y - a.y};
  for (int k = 0; k < 4; ++k) {
    if (p[k] == 0.0) {
      if (q[k] < 0.0) return false;
    } else {
      const double r = q[k] / p[k];
      if (p[k] < 0.0) {
        t0 = std::max(t0, r);
      } else {
        t1 = std::min(t1, r);
      }
      if (t0 > t1) return false;
    }
  }
  return true;
}

inline std::vector<Vec2> quad(const DuoTrajectory& d, std::size_t i) {
  return {d.left[i].position(), d.left[i + 1].position(), d.right[i + 1].position(),
          d.right[i].position()};
}

struct Verdict {
  std::vector<int> uncovered;
  std::set<std::size_t> overlapping;
};

inline Verdict brute_coverage(const DuoTrajectory& d, const std::vector<Circle>& circles,
                              const OccupancyGrid& g) {
  Verdict v;
  for (std::size_t k = 0; k < circles.size(); ++k) {
    bool covered = false;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) covered = covered || in_quad(circles[k].center, quad(d, i));
    if (!covered) v.uncovered.push_back(static_cast<int>(k));
  }
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    const auto q = quad(d, i);
    for (int j = 0; j < g.height(); ++j) {
      for (int ii = 0; ii < g.width(); ++ii) {
        if (g.at(ii, j) != Cell::kObstacle) continue;
        const Vec2 lo{g.origin().x + ii * g.resolution(), g.origin().y + j * g.resolution()};
        const Vec2 hi{lo.x + g.resolution(), lo.y + g.resolution()};
        bool hit = false;
        for (const Vec2& c : {lo, Vec2{hi.x, lo.y}, hi, Vec2{lo.x, hi.y}}) hit = hit || in_quad(c, q);
        for (std::size_t k = 0; k < 4; ++k) hit = hit || clip_segment(q[k], q[(k + 1) % 4], lo, hi);
        if (hit) v.overlapping.insert(i);
      }
    }
  }
  return v;
}

/// Random small instance: grid <= 50x50 with sparse obstacles, a duo of
/// N <= 30 wandering poses kept inside the map, and a few circles.
struct Instance {
  OccupancyGrid grid;
  DuoTrajectory duo;
  std::vector<Circle> circles;
};

inline Instance random_instance(std::mt19937& rng) {
  std::uniform_int_distribution<int> dim(10, 50);
  const int w = dim(rng), h = dim(rng);
  Instance in{OccupancyGrid(w, h, 0.1), {}, {}};
  std::bernoulli_distribution obstacle(0.04);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i)
      if (obstacle(rng)) in.grid.set(i, j, Cell::kObstacle);
  const double W = w * 0.1, H = h * 0.1;
  std::uniform_int_distribution<int> len(2, 30);
  const int n = len(rng);
  std::uniform_real_distribution<> ux(0.2, W - 0.2), uy(0.2, H - 0.2), step(-0.3, 0.3);
  Vec2 a{ux(rng), uy(rng)}, b{ux(rng), uy(rng)};
  auto clampv = [&](Vec2 p) { return Vec2{std::clamp(p.x, 0.2, W - 0.2), std::clamp(p.y, 0.2, H - 0.2)}; };
  for (int i = 0; i < n; ++i) {
    in.duo.left.push_back({a.x, a.y, 0.0});
    in.duo.right.push_back({b.x, b.y, 0.0});
    a = clampv(a + Vec2{step(rng), step(rng)});
    b = clampv(b + Vec2{step(rng), step(rng)});
  }
  std::uniform_int_distribution<int> nc(0, 6);
  for (int k = nc(rng); k > 0; --k) in.circles.push_back({{ux(rng), uy(rng)}, 0.1, {}, {}});
  return in;
}

/// Central finite-difference gradient.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

inline PoseSeq to_poses(const Eigen::VectorXd& x) {
  PoseSeq s(x.size() / 3);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = {x(3 * i), x(3 * i + 1), x(3 * i + 2)};
  return s;
}

inline Eigen::VectorXd to_vector(const PoseSeq& s) {
  Eigen::VectorXd x(3 * s.size());
  for (std::size_t i = 0; i < s.size(); ++i) x.segment<3>(3 * i) << s[i].x, s[i].y, s[i].phi;
  return x;
}

}  // namespace tduo::oracle
