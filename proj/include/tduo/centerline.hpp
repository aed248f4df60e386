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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "tduo/common.hpp"
#include "tduo/environment.hpp"
#include "tduo/geometry.hpp"
#include "tduo/grid.hpp"

namespace tduo {

inline constexpr int kFree = -1;

/// Centerline of the duo: N poses with per-point labels. `labels[i]` is
/// kFree or the index of the circle whose disk contains the point.
struct Centerline {
  PoseSeq points;
  std::vector<int> labels;
};

struct CenterlineOptions {
  int num_points = 200;
  double fillet_radius = 0.27;  // upper bound on corner rounding radius
};

// ---------------------------------------------------------------------------
// Visiting order

namespace detail {

inline double open_tour_length(const std::vector<int>& order, const std::vector<Vec2>& c, Vec2 s,
                               Vec2 e) {
  if (order.empty()) return distance(s, e);
  double len = distance(s, c[order.front()]) + distance(c[order.back()], e);
  for (std::size_t k = 1; k < order.size(); ++k) len += distance(c[order[k - 1]], c[order[k]]);
  return len;
}

inline constexpr std::size_t kExactOrderLimit = 10;

// Held-Karp over subsets; exact for the open path start -> all -> end.
inline std::vector<int> exact_order(const std::vector<Vec2>& c, Vec2 s, Vec2 e) {
  const int m = static_cast<int>(c.size());
  const int full = (1 << m) - 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(static_cast<std::size_t>(full + 1) * m, kInf);
  std::vector<int> parent(dp.size(), -1);
  auto at = [m](int mask, int last) { return static_cast<std::size_t>(mask) * m + last; };
  for (int k = 0; k < m; ++k) dp[at(1 << k, k)] = distance(s, c[k]);
  for (int mask = 1; mask <= full; ++mask) {
    for (int last = 0; last < m; ++last) {
      const double cur = dp[at(mask, last)];
      if (!(mask & (1 << last)) || cur == kInf) continue;
      for (int nxt = 0; nxt < m; ++nxt) {
        if (mask & (1 << nxt)) continue;
        const int nm = mask | (1 << nxt);
        const double cand = cur + distance(c[last], c[nxt]);
        if (cand < dp[at(nm, nxt)]) {
          dp[at(nm, nxt)] = cand;
          parent[at(nm, nxt)] = last;
        }
      }
    }
  }
  int best = 0;
  double best_len = kInf;
  for (int k = 0; k < m; ++k) {
    const double len = dp[at(full, k)] + distance(c[k], e);
    if (len < best_len) {
      best_len = len;
      best = k;
    }
  }
  std::vector<int> order;
  int mask = full;
  int cur = best;
  while (cur >= 0) {
    order.push_back(cur);
    const int p = parent[at(mask, cur)];
    mask &= ~(1 << cur);
    cur = p;
  }
  std::reverse(order.begin(), order.end());
  return order;
}

inline std::vector<int> heuristic_order(const std::vector<Vec2>& c, Vec2 s, Vec2 e) {
  const std::size_t m = c.size();
  std::vector<int> order;
  std::vector<bool> used(m, false);
  Vec2 cur = s;
  for (std::size_t step = 0; step < m; ++step) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      if (!used[k] && distance(cur, c[k]) < bd) {
        bd = distance(cur, c[k]);
        best = static_cast<int>(k);
      }
    }
    used[best] = true;
    order.push_back(best);
    cur = c[best];
  }
  // 2-opt on the open path with fixed endpoints.
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t a = 0; a + 1 < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        std::vector<int> cand = order;
        std::reverse(cand.begin() + static_cast<std::ptrdiff_t>(a),
                     cand.begin() + static_cast<std::ptrdiff_t>(b) + 1);
        if (open_tour_length(cand, c, s, e) < open_tour_length(order, c, s, e) - 1e-12) {
          order = std::move(cand);
          improved = true;
        }
      }
    }
  }
  return order;
}

}  // namespace detail

/// Order in which the centerline visits the circles: the shortest open tour
/// from the start midpoint to the end midpoint through all circle centers.
/// Exact up to 10 circles, nearest-neighbour + 2-opt beyond.
inline std::vector<int> order_circles(const Scenario& sc, const std::vector<Circle>& circles) {
  std::vector<Vec2> c;
  for (const Circle& k : circles) c.push_back(k.center);
  const Vec2 s = sc.start.midpoint().position();
  const Vec2 e = sc.end.midpoint().position();
  if (c.empty()) return {};
  if (c.size() <= detail::kExactOrderLimit) return detail::exact_order(c, s, e);
  return detail::heuristic_order(c, s, e);
}

// ---------------------------------------------------------------------------
// Grid search

namespace detail {

inline bool passable(const OccupancyGrid& g, CellIndex c) {
  return g.contains(c) && g.at(c) != Cell::kObstacle;
}

inline bool line_of_sight(const OccupancyGrid& g, Vec2 a, Vec2 b) {
  return all_along_segment(a, b, 0.25 * g.resolution(),
                           [&](Vec2 p) { return passable(g, g.world_to_cell(p)); });
}

}  // namespace detail

/// 8-connected A* between two world points on `g` (obstacle cells blocked,
/// no corner cutting). Returns the polyline start, cell centers..., goal, or
/// an empty vector when the goal is unreachable.
inline std::vector<Vec2> astar(const OccupancyGrid& g, Vec2 start, Vec2 goal) {
  const CellIndex s = g.world_to_cell(start);
  const CellIndex t = g.world_to_cell(goal);
  if (!detail::passable(g, s) || !detail::passable(g, t)) return {};
  const double res = g.resolution();
  const std::size_t n = g.cells().size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(n, kInf);
  std::vector<int> parent(n, -1);
  std::vector<bool> closed(n, false);
  auto h = [&](CellIndex c) {
    const double dx = std::abs(c.i - t.i), dy = std::abs(c.j - t.j);
    return res * ((dx + dy) + (std::sqrt(2.0) - 2.0) * std::min(dx, dy));
  };
  using Entry = std::tuple<double, double, int>;  // f, h, index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  cost[g.index(s)] = 0.0;
  open.emplace(h(s), h(s), static_cast<int>(g.index(s)));
  const int w = g.width();
  while (!open.empty()) {
    const auto [f, hh, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = true;
    const CellIndex c{idx % w, idx / w};
    if (c == t) break;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const CellIndex nb{c.i + di, c.j + dj};
        if (!detail::passable(g, nb)) continue;
        if (di != 0 && dj != 0 &&
            (!detail::passable(g, {c.i + di, c.j}) || !detail::passable(g, {c.i, c.j + dj}))) {
          continue;
        }
        const double step = (di != 0 && dj != 0) ? res * std::sqrt(2.0) : res;
        const std::size_t ni = g.index(nb);
        const double nc = cost[idx] + step;
        if (nc < cost[ni]) {
          cost[ni] = nc;
          parent[ni] = idx;
          open.emplace(nc + h(nb), h(nb), static_cast<int>(ni));
        }
      }
    }
  }
  if (!closed[g.index(t)]) return {};
  std::vector<Vec2> path{goal};
  for (int idx = parent[g.index(t)]; idx >= 0 && idx != static_cast<int>(g.index(s));
       idx = parent[idx]) {
    path.push_back(g.cell_center({idx % w, idx / w}));
  }
  path.push_back(start);
  std::reverse(path.begin(), path.end());
  return path;
}

/// Greedy line-of-sight shortcutting: keeps the farthest visible vertex.
inline std::vector<Vec2> shortcut(const OccupancyGrid& g, const std::vector<Vec2>& path) {
  if (path.size() <= 2) return path;
  std::vector<Vec2> out{path.front()};
  std::size_t i = 0;
  while (i + 1 < path.size()) {
    std::size_t j = path.size() - 1;
    while (j > i + 1 && !detail::line_of_sight(g, path[i], path[j])) --j;
    out.push_back(path[j]);
    i = j;
  }
  return out;
}

namespace detail {

// Replaces interior corners by circular arcs where the arc stays collision
// free. Arc radius starts at `radius` and halves on collision. `max_dev[k]`,
// when given, bounds how far the arc may pass from vertex k.
inline std::vector<Vec2> fillet(const OccupancyGrid& g, const std::vector<Vec2>& poly, double radius,
                                const std::vector<double>& max_dev = {}) {
  if (poly.size() < 3 || radius <= 0.0) return poly;
  std::vector<Vec2> out{poly.front()};
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    const Vec2 a = out.back();
    const Vec2 v = poly[k];
    const Vec2 b = poly[k + 1];
    const double la = distance(a, v), lb = distance(v, b);
    if (la < 1e-9 || lb < 1e-9) {
      out.push_back(v);
      continue;
    }
    const Vec2 u1 = (1.0 / la) * (v - a);
    const Vec2 u2 = (1.0 / lb) * (b - v);
    const double turn = std::atan2(cross(u1, u2), dot(u1, u2));
    if (std::abs(turn) < 1e-6 || std::abs(turn) > kPi - 1e-3) {
      out.push_back(v);
      continue;
    }
    const double tan_half = std::tan(0.5 * std::abs(turn));
    double rho = std::min(radius, 0.5 * std::min(la, lb) / tan_half);
    if (k < max_dev.size()) {
      const double bulge = 1.0 / std::cos(0.5 * std::abs(turn)) - 1.0;
      if (bulge > 0.0) rho = std::min(rho, max_dev[k] / bulge);
    }
    bool placed = false;
    for (int attempt = 0; attempt < 6 && rho > 0.25 * g.resolution(); ++attempt, rho *= 0.5) {
      const double tl = rho * tan_half;
      const Vec2 p_in = v - tl * u1;
      const double side = turn > 0 ? 1.0 : -1.0;
      const Vec2 nrm{-u1.y * side, u1.x * side};
      const Vec2 center = p_in + rho * nrm;
      const double a0 = std::atan2(p_in.y - center.y, p_in.x - center.x);
      const int segs = std::max(2, static_cast<int>(std::ceil(std::abs(turn) * rho / (0.5 * g.resolution()))));
      std::vector<Vec2> arc;
      for (int s = 0; s <= segs; ++s) {
        const double ang = a0 + turn * double(s) / segs;
        arc.push_back(center + rho * Vec2{std::cos(ang), std::sin(ang)});
      }
      bool ok = line_of_sight(g, a, arc.front());
      for (std::size_t s = 1; ok && s < arc.size(); ++s) ok = line_of_sight(g, arc[s - 1], arc[s]);
      if (!ok) continue;
      out.insert(out.end(), arc.begin(), arc.end());
      placed = true;
      break;
    }
    if (!placed) out.push_back(v);
  }
  out.push_back(poly.back());
  return out;
}

}  // namespace detail

/// Uniform arc-length resampling of a polyline to exactly n points; endpoints
/// are preserved bit-exactly.
inline std::vector<Vec2> resample(const std::vector<Vec2>& poly, int n) {
  if (n < 2) throw ValidationError("centerline needs at least 2 points");
  std::vector<double> s{0.0};
  for (std::size_t k = 1; k < poly.size(); ++k) s.push_back(s.back() + distance(poly[k - 1], poly[k]));
  const double total = s.back();
  std::vector<Vec2> out;
  out.reserve(n);
  std::size_t seg = 1;
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      out.push_back(poly.front());
      continue;
    }
    if (i == n - 1) {
      out.push_back(poly.back());
      continue;
    }
    const double target = total * double(i) / (n - 1);
    while (seg + 1 < s.size() && s[seg] < target) ++seg;
    const double span = s[seg] - s[seg - 1];
    const double t = span > 0 ? (target - s[seg - 1]) / span : 0.0;
    out.push_back(poly[seg - 1] + t * (poly[seg] - poly[seg - 1]));
  }
  return out;
}

/// Headings from forward differences; the last point inherits its
/// predecessor's heading. Zero-length steps keep the previous heading.
inline PoseSeq with_headings(const std::vector<Vec2>& pts, double fallback = 0.0) {
  PoseSeq out(pts.size());
  double prev = fallback;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double phi = prev;
    if (i + 1 < pts.size()) {
      const Vec2 d = pts[i + 1] - pts[i];
      if (norm(d) > 1e-12) phi = std::atan2(d.y, d.x);
    }
    out[i] = {pts[i].x, pts[i].y, phi};
    prev = phi;
  }
  return out;
}

inline std::vector<int> label_points(const PoseSeq& pts, const std::vector<Circle>& circles) {
  std::vector<int> labels(pts.size(), kFree);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < circles.size(); ++j) {
      if (distance(pts[i].position(), circles[j].center) <= circles[j].radius) {
        labels[i] = static_cast<int>(j);
        break;
      }
    }
  }
  return labels;
}

/// Plans the duo centerline from the start midpoint through every circle
/// center (in `order_circles` order) to the end midpoint on the inflated grid,
/// then shortcuts, rounds corners and resamples to `opts.num_points` points.
inline Centerline plan_centerline(const Scenario& sc, const OccupancyGrid& inflated,
                                  const std::vector<Circle>& circles,
                                  const CenterlineOptions& opts = {}) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Vec2> waypoints{sc.start.midpoint().position()};
  for (int k : order_circles(sc, circles)) waypoints.push_back(circles[k].center);
  waypoints.push_back(sc.end.midpoint().position());

  std::vector<Vec2> poly{waypoints.front()};
  std::vector<double> max_dev{kInf};
  const std::vector<int> order = order_circles(sc, circles);
  for (std::size_t leg = 0; leg + 1 < waypoints.size(); ++leg) {
    const auto path = astar(inflated, waypoints[leg], waypoints[leg + 1]);
    if (path.empty()) {
      std::ostringstream os;
      os << "no obstacle-free route for centerline leg " << leg << " from (" << waypoints[leg].x
         << ", " << waypoints[leg].y << ") to (" << waypoints[leg + 1].x << ", "
         << waypoints[leg + 1].y << ")";
      throw PlanningError(os.str());
    }
    const auto cut = shortcut(inflated, path);
    for (std::size_t k = 1; k < cut.size(); ++k) {
      if (distance(cut[k], poly.back()) > 1e-12) {
        poly.push_back(cut[k]);
        max_dev.push_back(kInf);
      }
    }
    // Corners at circle centers stay well inside the circle.
    if (leg < order.size()) max_dev.back() = 0.5 * circles[order[leg]].radius;
  }
  if (poly.size() == 1) poly.push_back(poly.front());
  poly = detail::fillet(inflated, poly, opts.fillet_radius, max_dev);
  const auto pts = resample(poly, opts.num_points);
  Centerline c;
  c.points = with_headings(pts, sc.start.midpoint().phi);
  c.labels = label_points(c.points, circles);
  return c;
}

inline void write_centerline_csv(std::ostream& os, const Centerline& c) {
  os << "idx,x,y,phi,label\n";
  char buf[160];
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const Pose& p = c.points[i];
    if (c.labels[i] == kFree) {
      std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f,%.9f,FREE\n", i, p.x, p.y, p.phi);
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f,%.9f,CIRCLE(%d)\n", i, p.x, p.y, p.phi,
                    c.labels[i]);
    }
    os << buf;
  }
}

}  // namespace tduo
