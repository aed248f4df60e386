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

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

#include "tduo/centerline.hpp"
#include "tduo/common.hpp"
#include "tduo/environment.hpp"

namespace tduo {

/// Synchronized left/right pose sequences of the duo.
struct DuoTrajectory {
  PoseSeq left;
  PoseSeq right;

  std::size_t size() const { return left.size(); }
  const PoseSeq& robot(int which) const { return which == 1 ? left : right; }
  PoseSeq& robot(int which) { return which == 1 ? left : right; }
  friend bool operator==(const DuoTrajectory&, const DuoTrajectory&) = default;
};

inline void validate(const DuoTrajectory& duo) {
  if (duo.left.size() != duo.right.size()) throw ValidationError("left/right lengths differ");
  if (duo.left.size() < 2) throw ValidationError("duo trajectory needs at least 2 rows");
  for (const PoseSeq* s : {&duo.left, &duo.right}) {
    for (const Pose& p : *s) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.phi)) {
        throw NumericError("duo trajectory has a non-finite coordinate");
      }
    }
  }
}

/// Unit vector pointing to the duo's left of heading `phi`.
inline Vec2 left_normal(double phi) { return {std::cos(phi + kPi / 2), std::sin(phi + kPi / 2)}; }

/// Offsets a free centerline point by +-l perpendicular to its heading.
inline std::pair<Pose, Pose> expand_free_point(const Pose& c, double l) {
  const Vec2 n = left_normal(c.phi);
  return {Pose{c.x + l * n.x, c.y + l * n.y, c.phi}, Pose{c.x - l * n.x, c.y - l * n.y, c.phi}};
}

/// Four candidates for a centerline point inside a circle: the two
/// intersections of the perpendicular line with the circle, then the two
/// free-space offsets. Empty when the perpendicular misses the circle.
struct CircleCandidates {
  std::array<Pose, 4> poses;
};

inline std::optional<CircleCandidates> expand_circle_point(const Pose& c, const Circle& circle, double l) {
  const Vec2 n = left_normal(c.phi);
  const Vec2 w = c.position() - circle.center;
  const double b = dot(n, w);
  const double disc = b * b - (dot(w, w) - circle.radius * circle.radius);
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  const double t1 = -b + root;
  const double t2 = -b - root;
  const auto [p3, p4] = expand_free_point(c, l);
  CircleCandidates out;
  out.poses = {Pose{c.x + t1 * n.x, c.y + t1 * n.y, c.phi}, Pose{c.x + t2 * n.x, c.y + t2 * n.y, c.phi},
               p3, p4};
  return out;
}

/// Picks the outermost candidates along the perpendicular through `c`:
/// largest signed offset is left, smallest is right. Offsets equal within
/// 1e-12 keep the earlier candidate, so circle intersections win ties.
inline std::pair<Pose, Pose> select_outer(const std::array<Pose, 4>& cand, const Pose& c) {
  const Vec2 n = left_normal(c.phi);
  auto offset = [&](const Pose& p) { return dot(n, p.position() - c.position()); };
  std::size_t hi = 0, lo = 0;
  for (std::size_t k = 1; k < cand.size(); ++k) {
    if (offset(cand[k]) > offset(cand[hi]) + 1e-12) hi = k;
    if (offset(cand[k]) < offset(cand[lo]) - 1e-12) lo = k;
  }
  return {cand[hi], cand[lo]};
}

struct BaselineResult {
  DuoTrajectory duo;
  std::vector<int> fallback_points;  // circle-labelled points expanded as free
};

/// Expands the centerline into left/right trajectories; the first and last
/// rows are replaced by the exact start and end duo poses.
inline BaselineResult build_baseline(const Centerline& c, const std::vector<Circle>& circles, double l,
                                     const DuoPose& start, const DuoPose& end) {
  if (!(l > 0.0)) throw ValidationError("expansion half-width l must be > 0");
  const std::size_t n = c.points.size();
  if (n < 2) throw ValidationError("centerline needs at least 2 points");
  BaselineResult out;
  out.duo.left.resize(n);
  out.duo.right.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Pose& p = c.points[i];
    std::pair<Pose, Pose> lr;
    if (c.labels[i] == kFree) {
      lr = expand_free_point(p, l);
    } else {
      const auto cand = expand_circle_point(p, circles.at(static_cast<std::size_t>(c.labels[i])), l);
      if (cand) {
        lr = select_outer(cand->poses, p);
      } else {
        lr = expand_free_point(p, l);
        out.fallback_points.push_back(static_cast<int>(i));
      }
    }
    out.duo.left[i] = lr.first;
    out.duo.right[i] = lr.second;
  }
  out.duo.left.front() = start.left;
  out.duo.right.front() = start.right;
  out.duo.left.back() = end.left;
  out.duo.right.back() = end.right;
  return out;
}

inline void write_trajectory_csv(std::ostream& os, const DuoTrajectory& duo) {
  os << "idx,xl,yl,phil,xr,yr,phir\n";
  char buf[256];
  for (std::size_t i = 0; i < duo.size(); ++i) {
    const Pose& a = duo.left[i];
    const Pose& b = duo.right[i];
    std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", i, a.x, a.y, a.phi, b.x,
                  b.y, b.phi);
    os << buf;
  }
}

}  // namespace tduo
