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

// Small planar geometry kernel: enclosing circles, polygon inclusion and
// segment/box intersection.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tduo/common.hpp"

namespace tduo {

struct Disc {
  Vec2 center;
  double radius = 0.0;

  bool contains(Vec2 p, double tol = 1e-12) const {
    return distance(p, center) <= radius + tol;
  }
};

namespace detail {

inline Disc disc_from(Vec2 a, Vec2 b) {
  return {0.5 * (a + b), 0.5 * distance(a, b)};
}

inline Disc disc_from(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 ab = b - a;
  const Vec2 ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  if (std::abs(d) < 1e-18) {
    // Collinear: the farthest pair spans the circle.
    Disc best = disc_from(a, b);
    for (const Disc& cand : {disc_from(a, c), disc_from(b, c)}) {
      if (cand.radius > best.radius) best = cand;
    }
    return best;
  }
  const double b2 = dot(ab, ab);
  const double c2 = dot(ac, ac);
  const Vec2 u{(ac.y * b2 - ab.y * c2) / d, (ab.x * c2 - ac.x * b2) / d};
  return {a + u, norm(u)};
}

}  // namespace detail

/// Minimum enclosing circle (Welzl's incremental algorithm over a shuffled
/// copy). The shuffle uses a fixed seed so results are reproducible.
inline Disc min_enclosing_circle(std::span<const Vec2> input, std::uint32_t seed = 0x5eed) {
  if (input.empty()) return {};
  std::vector<Vec2> pts(input.begin(), input.end());
  std::mt19937 rng(seed);
  std::shuffle(pts.begin(), pts.end(), rng);
  constexpr double kTol = 1e-12;
  Disc c{pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (c.contains(pts[i], kTol)) continue;
    c = {pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (c.contains(pts[j], kTol)) continue;
      c = detail::disc_from(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (c.contains(pts[k], kTol)) continue;
        c = detail::disc_from(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

/// Twice the signed area (positive for counter-clockwise).
inline double signed_area2(std::span<const Vec2> poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    a += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return a;
}

/// Even-odd point-in-polygon test; boundary points count as inside.
inline bool point_in_polygon(Vec2 p, std::span<const Vec2> poly, double tol = 1e-12) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[j];
    const Vec2 b = poly[i];
    // On-segment check.
    const Vec2 ab = b - a;
    const double len = norm(ab);
    if (len > 0.0) {
      const double t = dot(p - a, ab) / (len * len);
      if (t >= -tol && t <= 1.0 + tol && std::abs(cross(ab, p - a)) / len <= tol) return true;
    } else if (distance(p, a) <= tol) {
      return true;
    }
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

inline bool point_in_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c, double tol = 1e-12) {
  const std::array<Vec2, 3> t{a, b, c};
  return point_in_polygon(p, t, tol);
}

/// Proper or touching intersection of segments [a,b] and [c,d].
inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    const double v = cross(q - p, r - p);
    return (v > 0) - (v < 0);
  };
  auto on_seg = [](Vec2 p, Vec2 q, Vec2 r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
           r.y <= std::max(p.y, q.y);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_seg(a, b, c)) return true;
  if (o2 == 0 && on_seg(a, b, d)) return true;
  if (o3 == 0 && on_seg(c, d, a)) return true;
  if (o4 == 0 && on_seg(c, d, b)) return true;
  return false;
}

/// Axis-aligned box [lo, hi].
struct Box {
  Vec2 lo;
  Vec2 hi;

  bool contains(Vec2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
  std::array<Vec2, 4> corners() const {
    return {lo, Vec2{hi.x, lo.y}, hi, Vec2{lo.x, hi.y}};
  }
};

inline bool segment_intersects_box(Vec2 a, Vec2 b, const Box& box) {
  if (box.contains(a) || box.contains(b)) return true;
  const auto c = box.corners();
  for (int k = 0; k < 4; ++k) {
    if (segments_intersect(a, b, c[k], c[(k + 1) % 4])) return true;
  }
  return false;
}

/// Uniform sample of a segment by a point generator; used by line-of-sight
/// checks on grids.
template <typename Fn>
bool all_along_segment(Vec2 a, Vec2 b, double step, Fn&& ok) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int k = 0; k <= n; ++k) {
    const double t = double(k) / n;
    if (!ok(a + t * (b - a))) return false;
  }
  return true;
}

}  // namespace tduo
