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

// Trajectory cost terms and the exact constraint checkers.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tduo/baseline.hpp"
#include "tduo/common.hpp"
#include "tduo/environment.hpp"
#include "tduo/geometry.hpp"
#include "tduo/grid.hpp"

namespace tduo {

struct CostParams {
  double K1 = 1e7;
  double K2 = 1e7;
  double K3 = 1e7;
  double t1 = 300.0;
  double t2 = 10.0;
  double kd1 = 20.0;
  double kd2 = 15.0;
  double b1 = 110.0;
  double b2 = 110.0;
  double b3 = 1.0;
  double a1 = 1.0;
  double a2 = 1.0;
  double a3 = 1.0;
  double a4 = 1.0;
  double dL_max = 0.05;
  double dphi_max = 0.1;
  double l = 0.3;  // half of the nominal duo separation used for expansion
  double d_max = 2.0;
  double min_ratio = 0.1;          // d_min = min_ratio * d_max
  double rest_ratio = 2.0 / kPi;   // d_rest = rest_ratio * d_max (half circle)

  double d_min() const { return min_ratio * d_max; }
  double d_rest() const { return rest_ratio * d_max; }
  double gamma1() const { return kPi / (2.0 * (d_rest() - d_min())); }
  double gamma2() const { return -gamma1() * d_rest(); }

  CostParams with_net_length(double d) const {
    CostParams p = *this;
    p.d_max = d;
    return p;
  }

  void validate() const {
    if (!(d_max > 0.0) || !(0.0 < min_ratio && min_ratio < rest_ratio && rest_ratio < 1.0)) {
      throw ValidationError("cost parameters need 0 < d_min < d_rest < d_max");
    }
    for (double g : {t1, t2, kd1, kd2, b1, b2, b3, a1, a2, a3, a4}) {
      if (!(g >= 0.0)) throw ValidationError("cost gains must be >= 0");
    }
    if (!(K1 > 0.0 && K2 > 0.0 && K3 > 0.0)) throw ValidationError("K_1, K_2, K_3 must be > 0");
    if (!(dL_max > 0.0 && dphi_max > 0.0 && l > 0.0)) {
      throw ValidationError("delta_L_max, delta_phi_max and l must be > 0");
    }
  }

  /// Defaults overridden by a scenario's `params` map.
  static CostParams from_scenario(const Scenario& sc) {
    CostParams p;
    p.K1 = sc.param("K_1", p.K1);
    p.K2 = sc.param("K_2", p.K2);
    p.K3 = sc.param("K_3", p.K3);
    p.t1 = sc.param("t_1", p.t1);
    p.t2 = sc.param("t_2", p.t2);
    p.kd1 = sc.param("k_d1", p.kd1);
    p.kd2 = sc.param("k_d2", p.kd2);
    p.b1 = sc.param("b_1", p.b1);
    p.b2 = sc.param("b_2", p.b2);
    p.b3 = sc.param("b_3", p.b3);
    p.a1 = sc.param("a_1", p.a1);
    p.a2 = sc.param("a_2", p.a2);
    p.a3 = sc.param("a_3", p.a3);
    p.a4 = sc.param("a_4", p.a4);
    p.dL_max = sc.param("delta_L_max", p.dL_max);
    p.dphi_max = sc.param("delta_phi_max", p.dphi_max);
    p.l = sc.param("l", p.l);
    p.d_max = sc.param("d_max", p.d_max);
    p.validate();
    return p;
  }
};

// ---------------------------------------------------------------------------
// Second-difference operator

/// A is the (N-2) x N stencil [1 -2 1]; Q = A^T A.
struct DifferenceOperator {
  Eigen::MatrixXd A;
  Eigen::MatrixXd Q;

  explicit DifferenceOperator(int n) : A(Eigen::MatrixXd::Zero(std::max(n - 2, 0), n)) {
    if (n < 3) throw ValidationError("difference operator needs N >= 3");
    for (int r = 0; r < n - 2; ++r) {
      A(r, r) = 1.0;
      A(r, r + 1) = -2.0;
      A(r, r + 2) = 1.0;
    }
    Q = A.transpose() * A;
  }
};

// ---------------------------------------------------------------------------
// Obstacle cost

inline double obstacle_cost_exact_grid(Vec2 p, const OccupancyGrid& grid, const CostParams& prm) {
  return grid.label_at(p) != Cell::kEmpty ? prm.K1 : 0.0;
}

/// Potential-field term of one circle; zero outside the circle.
inline double circle_cost(Vec2 p, const Circle& c, const CostParams& prm, Vec2* grad = nullptr) {
  const double D = distance(p, c.center);
  if (grad) *grad = {};
  if (D > c.radius) return 0.0;
  if (D == 0.0) return std::numeric_limits<double>::infinity();
  const double u = 1.0 / D - 1.0 / c.radius;
  if (grad) {
    const double dJdD = prm.K2 * u * (-1.0 / (D * D));
    *grad = (dJdD / D) * (p - c.center);
  }
  return 0.5 * prm.K2 * u * u;
}

/// J_obs of one point: K_1 on occupied or out-of-map cells plus the circle
/// potentials.
inline double obstacle_cost(Vec2 p, const OccupancyGrid& grid, const std::vector<Circle>& circles,
                            const CostParams& prm) {
  double j = obstacle_cost_exact_grid(p, grid, prm);
  for (const Circle& c : circles) j += circle_cost(p, c, prm);
  return j;
}

// ---------------------------------------------------------------------------
// Distance cost

/// J_dist summed over the N-1 steps of a pose sequence.
inline double distance_cost(const PoseSeq& s, double t1, double t2) {
  double j = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double dx = s[i].x - s[i + 1].x;
    const double dy = s[i].y - s[i + 1].y;
    j += t1 * std::hypot(dx, dy) + t2 * std::abs(wrap_angle(s[i].phi - s[i + 1].phi));
  }
  return j;
}

/// J_dist with |.| replaced by sqrt(.^2 + eps^2) so the gradient exists at
/// zero-length steps; eps = 0 gives the exact value. Accumulates d/dpose
/// into `grad` (3 entries per pose) when non-null.
inline double distance_cost_smooth(const PoseSeq& s, double t1, double t2, double eps,
                                   Eigen::VectorXd* grad) {
  double j = 0.0;
  const double e2 = eps * eps;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double dx = s[i].x - s[i + 1].x;
    const double dy = s[i].y - s[i + 1].y;
    const double dp = wrap_angle(s[i].phi - s[i + 1].phi);
    const double len = std::sqrt(dx * dx + dy * dy + e2);
    const double ang = std::sqrt(dp * dp + e2);
    j += t1 * len + t2 * ang;
    if (grad) {
      const double gx = len > 0 ? t1 * dx / len : 0.0;
      const double gy = len > 0 ? t1 * dy / len : 0.0;
      const double gp = ang > 0 ? t2 * dp / ang : 0.0;
      (*grad)(3 * i) += gx;
      (*grad)(3 * i + 1) += gy;
      (*grad)(3 * i + 2) += gp;
      (*grad)(3 * i + 3) -= gx;
      (*grad)(3 * i + 4) -= gy;
      (*grad)(3 * i + 5) -= gp;
    }
  }
  return j;
}

// ---------------------------------------------------------------------------
// Expansion cost

/// Unclamped U-shape: tan^2 barrier below d_rest, (d - d_rest)^2 terms above.
/// +inf outside the open interval (d_min, d_max). Optional partials with
/// respect to d and to d_max (d_min and d_rest scale with d_max).
inline double expansion_barrier(double d, const CostParams& p, double* dd = nullptr,
                                double* ddmax = nullptr) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double dmax = p.d_max;
  const double dmin = p.d_min();
  const double drest = p.d_rest();
  if (dd) *dd = 0.0;
  if (ddmax) *ddmax = 0.0;
  if (!(d > dmin) || !(d < dmax)) return kInf;
  if (d <= drest) {
    const double c = kPi / (2.0 * (p.rest_ratio - p.min_ratio));
    const double u = p.gamma1() * d + p.gamma2();
    const double t = std::tan(u);
    const double sec2 = 1.0 + t * t;
    const double dfdu = 2.0 * p.kd1 * t * sec2;
    if (dd) *dd = dfdu * c / dmax;
    if (ddmax) *ddmax = dfdu * (-c * d / (dmax * dmax));
    return p.kd1 * t * t;
  }
  const double e = d - drest;
  const double g = d - dmax;
  const double f = p.kd2 * e * e + (e * e) / (g * g);
  const double dfde = 2.0 * p.kd2 * e + 2.0 * e / (g * g);
  const double dfdg = -2.0 * e * e / (g * g * g);
  if (dd) *dd = dfde + dfdg;
  if (ddmax) *ddmax = -p.rest_ratio * dfde - dfdg;
  return f;
}

/// J_e of one separation: the U-shape clamped at K_3, and K_3 outside
/// [d_min, d_max].
inline double expansion_cost(double d, const CostParams& p) {
  if (d < p.d_min() || d > p.d_max) return p.K3;
  return std::min(p.K3, expansion_barrier(d, p));
}

// ---------------------------------------------------------------------------
// Smoothness cost

/// Second difference of column `col` (0 = x, 1 = y, 2 = phi) at interior
/// index k; heading differences are wrapped.
inline double second_difference(const PoseSeq& s, std::size_t k, int col) {
  if (col == 0) return s[k - 1].x - 2.0 * s[k].x + s[k + 1].x;
  if (col == 1) return s[k - 1].y - 2.0 * s[k].y + s[k + 1].y;
  return wrap_angle(s[k + 1].phi - s[k].phi) - wrap_angle(s[k].phi - s[k - 1].phi);
}

/// J_s = sum_j b_j col_j^T Q col_j, evaluated by the stencil. Accumulates the
/// gradient into `grad` when non-null.
inline double smoothness_cost(const PoseSeq& s, const std::array<double, 3>& b,
                              Eigen::VectorXd* grad = nullptr) {
  if (s.size() < 3) throw ValidationError("smoothness cost needs N >= 3");
  double j = 0.0;
  for (std::size_t k = 1; k + 1 < s.size(); ++k) {
    for (int col = 0; col < 3; ++col) {
      const double a = second_difference(s, k, col);
      j += b[col] * a * a;
      if (grad) {
        const double g = 2.0 * b[col] * a;
        (*grad)(3 * (k - 1) + col) += g;
        (*grad)(3 * k + col) -= 2.0 * g;
        (*grad)(3 * (k + 1) + col) += g;
      }
    }
  }
  return j;
}

inline std::array<double, 3> smoothness_weights(const CostParams& p) { return {p.b1, p.b2, p.b3}; }

// ---------------------------------------------------------------------------
// Totals

struct CostBreakdown {
  double J_s = 0.0;
  double J_dist = 0.0;
  double J_obs = 0.0;
  double J_e = 0.0;
  double total = 0.0;
};

inline double separation(const DuoTrajectory& duo, std::size_t i) {
  return distance(duo.left[i].position(), duo.right[i].position());
}

/// Robot-own terms (J_s, J_dist, J_obs) of one pose sequence, unweighted.
inline CostBreakdown own_terms(const PoseSeq& s, const OccupancyGrid& grid,
                               const std::vector<Circle>& circles, const CostParams& p) {
  CostBreakdown c;
  c.J_s = s.size() >= 3 ? smoothness_cost(s, smoothness_weights(p)) : 0.0;
  c.J_dist = distance_cost(s, p.t1, p.t2);
  for (const Pose& q : s) c.J_obs += obstacle_cost(q.position(), grid, circles, p);
  return c;
}

inline double expansion_total(const DuoTrajectory& duo, const CostParams& p) {
  double j = 0.0;
  for (std::size_t i = 0; i < duo.size(); ++i) j += expansion_cost(separation(duo, i), p);
  return j;
}

/// Total cost seen by the active robot (1 = left, 2 = right): its own
/// smoothness, distance and obstacle terms plus the shared expansion term.
inline CostBreakdown total_cost(const DuoTrajectory& duo, int active, const OccupancyGrid& grid,
                                const std::vector<Circle>& circles, const CostParams& p) {
  CostBreakdown c = own_terms(duo.robot(active), grid, circles, p);
  c.J_e = expansion_total(duo, p);
  c.total = p.a1 * c.J_s + p.a2 * c.J_dist + p.a3 * c.J_obs + p.a4 * c.J_e;
  return c;
}

/// Duo cost: both robots' own terms plus the expansion term counted once.
/// Each half-problem differs from it by terms of the frozen robot only.
inline CostBreakdown duo_total_cost(const DuoTrajectory& duo, const OccupancyGrid& grid,
                                    const std::vector<Circle>& circles, const CostParams& p) {
  const CostBreakdown l = own_terms(duo.left, grid, circles, p);
  const CostBreakdown r = own_terms(duo.right, grid, circles, p);
  CostBreakdown c;
  c.J_s = l.J_s + r.J_s;
  c.J_dist = l.J_dist + r.J_dist;
  c.J_obs = l.J_obs + r.J_obs;
  c.J_e = expansion_total(duo, p);
  c.total = p.a1 * c.J_s + p.a2 * c.J_dist + p.a3 * c.J_obs + p.a4 * c.J_e;
  return c;
}

// ---------------------------------------------------------------------------
// Velocity bounds

struct VelocityViolation {
  std::size_t index;  // step from index to index + 1
  double step;
  double turn;
};

/// Steps longer than dL_max or turning more than dphi_max (both inclusive).
inline std::vector<VelocityViolation> check_velocity(const PoseSeq& s, double dL_max, double dphi_max) {
  constexpr double kSlack = 1e-12;
  std::vector<VelocityViolation> out;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double step = distance(s[i].position(), s[i + 1].position());
    const double turn = std::abs(wrap_angle(s[i + 1].phi - s[i].phi));
    if (step > dL_max + kSlack || turn > dphi_max + kSlack) out.push_back({i, step, turn});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quadrilateral coverage and enclosure

/// Region swept between steps i and i+1: the quadrilateral
/// (P1_i, P1_i+1, P2_i+1, P2_i), or two triangles when it self-intersects.
struct StepRegion {
  std::vector<std::vector<Vec2>> parts;
  bool bowtie = false;
};

namespace detail {

inline bool segment_cross_point(Vec2 a, Vec2 b, Vec2 c, Vec2 d, Vec2* x) {
  const Vec2 r = b - a, s = d - c;
  const double den = cross(r, s);
  if (std::abs(den) < 1e-15) return false;
  const double t = cross(c - a, s) / den;
  const double u = cross(c - a, r) / den;
  if (t <= 0.0 || t >= 1.0 || u <= 0.0 || u >= 1.0) return false;
  *x = a + t * r;
  return true;
}

}  // namespace detail

inline StepRegion step_region(const DuoTrajectory& duo, std::size_t i) {
  const Vec2 a = duo.left[i].position();
  const Vec2 b = duo.left[i + 1].position();
  const Vec2 c = duo.right[i + 1].position();
  const Vec2 d = duo.right[i].position();
  StepRegion r;
  Vec2 x;
  if (detail::segment_cross_point(a, b, c, d, &x)) {
    r.bowtie = true;
    r.parts = {{x, b, c}, {x, d, a}};
  } else if (detail::segment_cross_point(b, c, d, a, &x)) {
    r.bowtie = true;
    r.parts = {{x, c, d}, {x, a, b}};
  } else {
    r.parts = {{a, b, c, d}};
  }
  return r;
}

inline bool region_contains(const StepRegion& r, Vec2 p) {
  for (const auto& part : r.parts) {
    if (point_in_polygon(p, part)) return true;
  }
  return false;
}

/// True when the region and the closed box share a point.
inline bool region_overlaps_box(const StepRegion& r, const Box& box) {
  const Vec2 center = 0.5 * (box.lo + box.hi);
  for (const auto& part : r.parts) {
    if (point_in_polygon(center, part)) return true;
    for (std::size_t k = 0; k < part.size(); ++k) {
      if (segment_intersects_box(part[k], part[(k + 1) % part.size()], box)) return true;
    }
  }
  return false;
}

inline Box cell_box(const OccupancyGrid& g, CellIndex c) {
  const Vec2 lo{g.origin().x + c.i * g.resolution(), g.origin().y + c.j * g.resolution()};
  return {lo, lo + Vec2{g.resolution(), g.resolution()}};
}

struct OverlapRecord {
  std::size_t quad;
  CellIndex cell;
};

struct CoverageReport {
  std::vector<int> uncovered;              // circle indices whose center is outside every region
  std::vector<OverlapRecord> overlaps;     // first obstacle cell hit per offending quad
  std::vector<std::size_t> bowties;        // self-intersecting quads (split and tested)

  bool ok() const { return uncovered.empty() && overlaps.empty(); }
};

/// Checks that every circle center lies in some step region and that no
/// region touches an obstacle cell of `grid`.
inline CoverageReport coverage_and_enclosure(const DuoTrajectory& duo, const std::vector<Circle>& circles,
                                             const OccupancyGrid& grid) {
  CoverageReport rep;
  std::vector<StepRegion> regions;
  regions.reserve(duo.size());
  for (std::size_t i = 0; i + 1 < duo.size(); ++i) {
    regions.push_back(step_region(duo, i));
    if (regions.back().bowtie) rep.bowties.push_back(i);
  }
  for (std::size_t k = 0; k < circles.size(); ++k) {
    bool covered = false;
    for (const auto& r : regions) {
      if (region_contains(r, circles[k].center)) {
        covered = true;
        break;
      }
    }
    if (!covered) rep.uncovered.push_back(static_cast<int>(k));
  }
  for (std::size_t i = 0; i < regions.size(); ++i) {
    Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Vec2 hi = -1.0 * lo;
    for (const auto& part : regions[i].parts) {
      for (const Vec2& v : part) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
      }
    }
    const CellIndex c0 = grid.world_to_cell(lo);
    const CellIndex c1 = grid.world_to_cell(hi);
    bool hit = false;
    for (int j = c0.j - 1; j <= c1.j + 1 && !hit; ++j) {
      for (int ii = c0.i - 1; ii <= c1.i + 1 && !hit; ++ii) {
        const CellIndex c{ii, j};
        // Cells beyond the map edge count as obstacles.
        if (grid.contains(c) && grid.at(c) != Cell::kObstacle) continue;
        if (region_overlaps_box(regions[i], cell_box(grid, c))) {
          rep.overlaps.push_back({i, c});
          hit = true;
        }
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Export

/// Per-index cost terms: own terms for each robot and the shared expansion.
inline void write_cost_breakdown_csv(std::ostream& os, const DuoTrajectory& duo, const OccupancyGrid& grid,
                                     const std::vector<Circle>& circles, const CostParams& p) {
  os << "term,index,value\n";
  char buf[128];
  auto row = [&](const char* term, std::size_t i, double v) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.9f\n", term, i, v);
    os << buf;
  };
  const char* names[2][2] = {{"J_dist_left", "J_obs_left"}, {"J_dist_right", "J_obs_right"}};
  for (int r = 0; r < 2; ++r) {
    const PoseSeq& s = r == 0 ? duo.left : duo.right;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      row(names[r][0], i, distance_cost(PoseSeq{s[i], s[i + 1]}, p.t1, p.t2));
    }
    for (std::size_t i = 0; i < s.size(); ++i) row(names[r][1], i, obstacle_cost(s[i].position(), grid, circles, p));
  }
  for (std::size_t i = 0; i < duo.size(); ++i) row("J_e", i, expansion_cost(separation(duo, i), p));
  if (duo.size() >= 3) {
    row("J_s_left", 0, smoothness_cost(duo.left, smoothness_weights(p)));
    row("J_s_right", 0, smoothness_cost(duo.right, smoothness_weights(p)));
  }
}

}  // namespace tduo
