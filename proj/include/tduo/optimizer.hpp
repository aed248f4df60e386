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

// Alternating per-robot trajectory optimization of the duo.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tduo/baseline.hpp"
#include "tduo/costs.hpp"
#include "tduo/environment.hpp"
#include "tduo/nlp.hpp"

namespace tduo {

enum class NetLengthMode { kFixed, kFree };

/// How the separation of the duo is treated.
///  kUShape: the expansion cost J_e with its d_min/d_max barriers.
///  kNone:   no expansion cost and no separation bounds.
///  kHard:   no expansion cost; separation held at d_rest except where the
///           fixed endpoints make that unreachable.
enum class ExpansionMode { kUShape, kNone, kHard };

struct OptimizerConfig {
  int N_total = 8;
  NetLengthMode net_length = NetLengthMode::kFixed;
  ExpansionMode expansion = ExpansionMode::kUShape;
  nlp::Options solver = default_solver();
  // Constraint margins as fractions of the grid resolution.
  double clearance_margin = 0.75;
  double coverage_margin = 0.1;
  double enclosure_margin = 0.05;
  double intrusion_margin = 0.05;
  double hard_tolerance = 0.02;  // relative to d_rest
  int escalations = 3;
  bool require_feasible = true;  // throw when the final trajectory is infeasible

  static nlp::Options default_solver() {
    nlp::Options o;
    o.max_outer = 12;
    return o;
  }

  void validate() const {
    if (N_total < 2 || N_total % 2 != 0) throw ValidationError("N_total must be even and >= 2");
    if (escalations < 0) throw ValidationError("escalations must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Exact feasibility

struct FeasibilityReport {
  std::vector<VelocityViolation> velocity[2];  // left, right
  CoverageReport coverage;
  std::vector<std::size_t> separation;          // indices with d_i out of range
  std::vector<std::pair<int, std::size_t>> intrusions;  // (robot, index) inside a circle

  std::size_t count() const {
    return velocity[0].size() + velocity[1].size() + coverage.uncovered.size() +
           coverage.overlaps.size() + separation.size() + intrusions.size();
  }
  bool ok() const { return count() == 0; }

  std::string summary() const {
    std::ostringstream os;
    os << "velocity " << velocity[0].size() + velocity[1].size() << ", uncovered "
       << coverage.uncovered.size() << ", overlapping quads " << coverage.overlaps.size()
       << ", separation " << separation.size() << ", circle intrusions " << intrusions.size();
    if (!velocity[0].empty() || !velocity[1].empty()) {
      const auto& v = velocity[0].empty() ? velocity[1].front() : velocity[0].front();
      os << "; first velocity violation at step " << v.index << " (step " << v.step << " m, turn "
         << v.turn << " rad)";
    }
    if (!coverage.uncovered.empty()) os << "; circle " << coverage.uncovered.front() << " uncovered";
    if (!coverage.overlaps.empty()) os << "; quad " << coverage.overlaps.front().quad << " hits an obstacle";
    if (!separation.empty()) os << "; separation out of range at index " << separation.front();
    return os.str();
  }
};

/// Allowed |d_i - d_rest| under kHard: a tolerance band widened near the ends
/// by what the fixed endpoints force. The gap to d_rest closes by at most
/// kHardRamp * dL_max per step.
inline constexpr double kHardRamp = 1.0;

inline std::vector<double> hard_envelope(const DuoTrajectory& duo, const CostParams& p, double tol) {
  const std::size_t n = duo.size();
  const double rest = p.d_rest();
  const double e0 = std::abs(separation(duo, 0) - rest);
  const double e1 = std::abs(separation(duo, n - 1) - rest);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double from_start = e0 - kHardRamp * p.dL_max * double(i);
    const double from_end = e1 - kHardRamp * p.dL_max * double(n - 1 - i);
    env[i] = std::max({tol * rest, from_start + tol * rest, from_end + tol * rest});
  }
  return env;
}

inline FeasibilityReport check_feasibility(const DuoTrajectory& duo, const Environment& env, const CostParams& p,
                                           ExpansionMode mode, double hard_tol = 0.02) {
  FeasibilityReport r;
  r.velocity[0] = check_velocity(duo.left, p.dL_max, p.dphi_max);
  r.velocity[1] = check_velocity(duo.right, p.dL_max, p.dphi_max);
  r.coverage = coverage_and_enclosure(duo, env.circles, env.inflated);
  const std::size_t n = duo.size();
  if (mode == ExpansionMode::kUShape) {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double d = separation(duo, i);
      if (d < p.d_min() || d > p.d_max) r.separation.push_back(i);
    }
  } else if (mode == ExpansionMode::kHard) {
    const auto band = hard_envelope(duo, p, hard_tol);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (std::abs(separation(duo, i) - p.d_rest()) > band[i] * (1.0 + 1e-9)) r.separation.push_back(i);
    }
  }
  for (int robot = 0; robot < 2; ++robot) {
    const PoseSeq& s = robot == 0 ? duo.left : duo.right;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      for (const Circle& c : env.circles) {
        if (distance(s[i].position(), c.center) < c.radius - 1e-9) {
          r.intrusions.push_back({robot + 1, i});
          break;
        }
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Geometry with gradients

namespace detail {

/// Signed distance of c from the line through a->b, positive on the right
/// (the interior side of a clockwise quadrilateral). Gradients with respect
/// to a and b.
inline double right_side_distance(Vec2 a, Vec2 b, Vec2 c, Vec2* ga, Vec2* gb) {
  const Vec2 u = b - a, w = c - a;
  const double len = std::max(norm(u), 1e-12);
  const double F = cross(u, w) / len;
  const Vec2 uhat = (1.0 / len) * u;
  const Vec2 dFdu = (1.0 / len) * Vec2{w.y, -w.x} - (F / len) * uhat;
  const Vec2 dFdw = (1.0 / len) * Vec2{-u.y, u.x};
  // Right side is -F; dF/da = -(dF/du + dF/dw), dF/db = dF/du.
  if (ga) *ga = dFdu + dFdw;
  if (gb) *gb = -1.0 * dFdu;
  return -F;
}

/// Lower bound on the gap between the convex hull of four points and a box:
/// max over candidate axes (box axes and every pair direction normal) of the
/// projected gap. Positive only when a separating line exists.
inline double hull_box_separation(const std::array<Vec2, 4>& v, const Box& box, std::array<Vec2, 4>* grad) {
  const Vec2 ctr = 0.5 * (box.lo + box.hi);
  const double h = 0.5 * (box.hi.x - box.lo.x);
  double best = -std::numeric_limits<double>::infinity();
  std::array<Vec2, 4> best_grad{};
  auto consider = [&](Vec2 m, int pa, int pb, double ulen, Vec2 u, double s) {
    int arg = 0;
    double mn = dot(m, v[0]);
    for (int k = 1; k < 4; ++k) {
      const double t = dot(m, v[k]);
      if (t < mn) {
        mn = t;
        arg = k;
      }
    }
    const double gap = mn - dot(m, ctr) - h * (std::abs(m.x) + std::abs(m.y));
    if (gap <= best) return;
    best = gap;
    if (!grad) return;
    best_grad = {};
    best_grad[arg] = m;
    if (pa >= 0) {
      const Vec2 W = v[arg] - ctr - h * Vec2{m.x > 0 ? 1.0 : (m.x < 0 ? -1.0 : 0.0), m.y > 0 ? 1.0 : (m.y < 0 ? -1.0 : 0.0)};
      const double F = cross(u, W) / ulen;
      const Vec2 d = s * ((1.0 / ulen) * Vec2{W.y, -W.x} - (F / (ulen * ulen)) * u);
      best_grad[pb] = best_grad[pb] + d;
      best_grad[pa] = best_grad[pa] - d;
    }
  };
  for (const Vec2 m : {Vec2{1, 0}, Vec2{-1, 0}, Vec2{0, 1}, Vec2{0, -1}}) consider(m, -1, -1, 1.0, {}, 0.0);
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      const Vec2 u = v[b] - v[a];
      const double len = norm(u);
      if (len < 1e-9) continue;
      const Vec2 n = (1.0 / len) * Vec2{-u.y, u.x};
      consider(n, a, b, len, u, 1.0);
      consider(-1.0 * n, a, b, len, u, -1.0);
    }
  }
  if (grad) *grad = best_grad;
  return best;
}

/// Moves the active robot's interior poses so every separation lies strictly
/// inside (d_min, d_max); the barrier is infinite outside.
inline void repair_separation(DuoTrajectory& duo, int active, const CostParams& p) {
  PoseSeq& a = duo.robot(active);
  const PoseSeq& f = duo.robot(active == 1 ? 2 : 1);
  const double lo = p.d_min() * (1.0 + 1e-3), hi = p.d_max * (1.0 - 1e-3);
  for (std::size_t i = 1; i + 1 < a.size(); ++i) {
    const Vec2 d = a[i].position() - f[i].position();
    const double len = norm(d);
    if (len > lo && len < hi) continue;
    Vec2 dir = len > 1e-12 ? (1.0 / len) * d : (active == 1 ? 1.0 : -1.0) * left_normal(f[i].phi);
    const double target = std::clamp(len, lo, hi);
    a[i].x = f[i].x + target * dir.x;
    a[i].y = f[i].y + target * dir.y;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Half problem

struct Margins {
  double clearance;
  double coverage;
  double enclosure;
  double intrusion;
  double relative;  // relative shrink of the step, turn and band limits
};

/// The optimization of one robot's interior poses (and d_max in FREE mode)
/// with the other robot frozen.
class HalfProblem {
 public:
  HalfProblem(const DuoTrajectory& start, int active, const Environment& env, const CostParams& p,
              const OptimizerConfig& cfg, const Margins& m)
      : work_(start), active_(active), env_(env), p_(p), cfg_(cfg), m_(m), n_(start.size()) {
    free_ = cfg.net_length == NetLengthMode::kFree && cfg.expansion == ExpansionMode::kUShape;
    nv_ = 3 * (static_cast<int>(n_) - 2) + (free_ ? 1 : 0);
    if (cfg.expansion == ExpansionMode::kHard) band_ = hard_envelope(start, p, cfg.hard_tolerance);
    build_rows();
  }

  int num_vars() const { return nv_; }

  nlp::Vector initial() const {
    nlp::Vector x(nv_);
    const PoseSeq& s = work_.robot(active_);
    for (std::size_t i = 1; i + 1 < n_; ++i) {
      x(var(i, 0)) = s[i].x;
      x(var(i, 1)) = s[i].y;
      x(var(i, 2)) = s[i].phi;
    }
    if (free_) x(nv_ - 1) = p_.d_max;
    return x;
  }

  void bounds(nlp::Vector& lo, nlp::Vector& hi) const {
    lo.resize(nv_);
    hi.resize(nv_);
    const OccupancyGrid& g = env_.inflated;
    const double e = m_.enclosure + 1e-9;
    for (std::size_t i = 1; i + 1 < n_; ++i) {
      lo(var(i, 0)) = g.origin().x + e;
      hi(var(i, 0)) = g.origin().x + g.width() * g.resolution() - e;
      lo(var(i, 1)) = g.origin().y + e;
      hi(var(i, 1)) = g.origin().y + g.height() * g.resolution() - e;
      lo(var(i, 2)) = -1e6;
      hi(var(i, 2)) = 1e6;
    }
    if (free_) {
      const double s0 = separation(work_, 0), s1 = separation(work_, n_ - 1);
      lo(nv_ - 1) = std::max({2.0 * p_.l, s0, s1}) * (1.0 + 1e-6);
      hi(nv_ - 1) = std::min(double(n_) * p_.dL_max, std::min(s0, s1) / p_.min_ratio * (1.0 - 1e-6));
      if (hi(nv_ - 1) < lo(nv_ - 1)) throw InfeasibleError("no admissible net length for the given endpoints");
    }
  }

  /// Writes x into the working trajectory; returns the d_max it encodes.
  CostParams apply(const nlp::Vector& x) {
    PoseSeq& s = work_.robot(active_);
    for (std::size_t i = 1; i + 1 < n_; ++i) s[i] = {x(var(i, 0)), x(var(i, 1)), x(var(i, 2))};
    return free_ ? p_.with_net_length(x(nv_ - 1)) : p_;
  }

  const DuoTrajectory& trajectory() const { return work_; }

  double objective(const nlp::Vector& x, nlp::Vector* grad) {
    const CostParams p = apply(x);
    const PoseSeq& s = work_.robot(active_);
    const PoseSeq& f = work_.robot(active_ == 1 ? 2 : 1);
    const Eigen::Index full = static_cast<Eigen::Index>(3 * n_);
    Eigen::VectorXd gs = Eigen::VectorXd::Zero(full), gd = Eigen::VectorXd::Zero(full);
    const double Js = smoothness_cost(s, smoothness_weights(p), grad ? &gs : nullptr);
    const double Jd = distance_cost_smooth(s, p.t1, p.t2, 1e-6, grad ? &gd : nullptr);
    if (std::isnan(Js)) throw NumericError("J_s is NaN");
    if (std::isnan(Jd)) throw NumericError("J_dist is NaN");
    if (grad) {
      grad->setZero(nv_);
      for (std::size_t i = 1; i + 1 < n_; ++i) {
        for (int c = 0; c < 3; ++c) {
          (*grad)(var(i, c)) = p.a1 * gs(3 * static_cast<Eigen::Index>(i) + c) +
                               p.a2 * gd(3 * static_cast<Eigen::Index>(i) + c);
        }
      }
    }
    double Jo = 0.0;
    for (std::size_t i = 1; i + 1 < n_; ++i) {
      for (const Circle& c : env_.circles) {
        Vec2 g;
        const double v = circle_cost(s[i].position(), c, p, grad ? &g : nullptr);
        if (std::isnan(v)) throw NumericError("J_obs is NaN at index " + std::to_string(i));
        Jo += v;
        if (grad) {
          (*grad)(var(i, 0)) += p.a3 * g.x;
          (*grad)(var(i, 1)) += p.a3 * g.y;
        }
      }
    }
    double Je = 0.0;
    if (cfg_.expansion == ExpansionMode::kUShape) {
      const std::size_t first = free_ ? 0 : 1, last = free_ ? n_ : n_ - 1;
      for (std::size_t i = first; i < last; ++i) {
        const Vec2 d = s[i].position() - f[i].position();
        const double len = norm(d);
        double dd = 0.0, ddmax = 0.0;
        const double v = expansion_barrier(len, p, grad ? &dd : nullptr, grad ? &ddmax : nullptr);
        if (std::isnan(v)) throw NumericError("J_e is NaN at index " + std::to_string(i));
        Je += v;
        if (grad && std::isfinite(v)) {
          if (i > 0 && i + 1 < n_ && len > 0.0) {
            (*grad)(var(i, 0)) += p.a4 * dd * d.x / len;
            (*grad)(var(i, 1)) += p.a4 * dd * d.y / len;
          }
          if (free_) (*grad)(nv_ - 1) += p.a4 * ddmax;
        }
      }
    }
    return p.a1 * Js + p.a2 * Jd + p.a3 * Jo + p.a4 * Je;
  }

  int num_constraints() const { return static_cast<int>(rows_.size()); }

  void constraints(const nlp::Vector& x, nlp::Vector& g, std::vector<nlp::JacEntry>* jac) {
    const CostParams p = apply(x);
    const PoseSeq& L = work_.left;
    const PoseSeq& R = work_.right;
    const PoseSeq& s = work_.robot(active_);
    const double step_cap = p.dL_max * (1.0 - m_.relative);
    const double turn_cap = p.dphi_max * (1.0 - m_.relative);
    constexpr double eps = 1e-9;
    auto add = [&](int row, std::size_t i, int col, double v) {
      const int k = var(i, col);
      if (jac && k >= 0 && v != 0.0) jac->push_back({row, k, v});
    };
    auto add_point = [&](int row, int robot, std::size_t i, Vec2 v) {
      if (robot != active_) return;
      add(row, i, 0, v.x);
      add(row, i, 1, v.y);
    };
    auto quad = [&](std::size_t q) {
      return std::array<Vec2, 4>{L[q].position(), L[q + 1].position(), R[q + 1].position(), R[q].position()};
    };
    const std::array<int, 4> quad_robot{1, 1, 2, 2};
    auto quad_index = [](std::size_t q, int k) { return (k == 1 || k == 2) ? q + 1 : q; };

    for (int r = 0; r < num_constraints(); ++r) {
      const Row& row = rows_[r];
      switch (row.type) {
        case RowType::kStep: {
          const Vec2 d = s[row.i + 1].position() - s[row.i].position();
          const double len = std::sqrt(dot(d, d) + eps * eps);
          g(r) = len - step_cap;
          add_point(r, active_, row.i + 1, (1.0 / len) * d);
          add_point(r, active_, row.i, (-1.0 / len) * d);
          break;
        }
        case RowType::kTurn: {
          const double w = wrap_angle(s[row.i + 1].phi - s[row.i].phi);
          const double len = std::sqrt(w * w + eps * eps);
          g(r) = len - turn_cap;
          add(r, row.i + 1, 2, w / len);
          add(r, row.i, 2, -w / len);
          break;
        }
        case RowType::kClearance: {
          Vec2 grad;
          g(r) = m_.clearance - env_.clearance.eval(s[row.i].position(), &grad);
          add_point(r, active_, row.i, -1.0 * grad);
          break;
        }
        case RowType::kIntrusion: {
          const Circle& c = env_.circles[row.k];
          const Vec2 d = s[row.i].position() - c.center;
          const double len = std::max(norm(d), 1e-12);
          g(r) = c.radius + m_.intrusion - len;
          add_point(r, active_, row.i, (-1.0 / len) * d);
          break;
        }
        case RowType::kCoverage: {
          const auto v = quad(row.i);
          const int a = row.k, b = (row.k + 1) % 4;
          Vec2 ga, gb;
          const double h = detail::right_side_distance(v[a], v[b], env_.circles[row.cell.i].center, &ga, &gb);
          g(r) = m_.coverage - h;
          add_point(r, quad_robot[a], quad_index(row.i, a), -1.0 * ga);
          add_point(r, quad_robot[b], quad_index(row.i, b), -1.0 * gb);
          break;
        }
        case RowType::kEnclosure: {
          std::array<Vec2, 4> gv;
          const double sep = detail::hull_box_separation(quad(row.i), cell_box(env_.inflated, row.cell), &gv);
          g(r) = m_.enclosure - sep;
          for (int k = 0; k < 4; ++k) add_point(r, quad_robot[k], quad_index(row.i, k), -1.0 * gv[k]);
          break;
        }
        case RowType::kBand: {
          const PoseSeq& f = work_.robot(active_ == 1 ? 2 : 1);
          const Vec2 d = s[row.i].position() - f[row.i].position();
          const double len = std::max(norm(d), 1e-12);
          const double e = len - p.d_rest();
          const double b = band_[row.i] * (1.0 - m_.relative);
          g(r) = e * e - b * b;
          add_point(r, active_, row.i, (2.0 * e / len) * d);
          break;
        }
      }
    }
  }

 private:
  enum class RowType { kStep, kTurn, kClearance, kIntrusion, kCoverage, kEnclosure, kBand };
  struct Row {
    RowType type;
    std::size_t i = 0;   // pose, step or quad index
    int k = 0;           // circle index or quad edge
    CellIndex cell{};    // enclosure cell; coverage stores the circle in cell.i
  };

  int var(std::size_t i, int col) const {
    if (i == 0 || i + 1 >= n_) return -1;
    return 3 * static_cast<int>(i - 1) + col;
  }

  void build_rows() {
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      rows_.push_back({RowType::kStep, i});
      rows_.push_back({RowType::kTurn, i});
    }
    for (std::size_t i = 1; i + 1 < n_; ++i) {
      rows_.push_back({RowType::kClearance, i});
      for (std::size_t k = 0; k < env_.circles.size(); ++k) {
        rows_.push_back({RowType::kIntrusion, i, static_cast<int>(k)});
      }
      if (cfg_.expansion == ExpansionMode::kHard) rows_.push_back({RowType::kBand, i});
    }
    // Each circle is tied to the step region that holds its center deepest.
    for (std::size_t k = 0; k < env_.circles.size(); ++k) {
      const Vec2 c = env_.circles[k].center;
      std::size_t best_q = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q + 1 < n_; ++q) {
        const std::array<Vec2, 4> v{work_.left[q].position(), work_.left[q + 1].position(),
                                    work_.right[q + 1].position(), work_.right[q].position()};
        double depth = std::numeric_limits<double>::infinity();
        for (int e = 0; e < 4; ++e) {
          depth = std::min(depth, detail::right_side_distance(v[e], v[(e + 1) % 4], c, nullptr, nullptr));
        }
        if (depth > best) {
          best = depth;
          best_q = q;
        }
      }
      for (int e = 0; e < 4; ++e) {
        // Edge L_q -> L_q+1 only moves with the left robot, R_q+1 -> R_q with
        // the right; rows that cannot move are skipped.
        const bool movable = (e == 0 && active_ == 1) || (e == 2 && active_ == 2) || e == 1 || e == 3;
        const bool fixed_edge = (e == 1 && best_q + 2 >= n_) || (e == 3 && best_q == 0);
        if (movable && !fixed_edge) rows_.push_back({RowType::kCoverage, best_q, e, CellIndex{int(k), 0}});
      }
    }
    // Obstacle boundary cells near each quadrilateral.
    const OccupancyGrid& g = env_.inflated;
    std::vector<char> boundary(g.cells().size(), 0);
    for (const CellIndex& c : env_.boundary) boundary[g.index(c)] = 1;
    const double reach = 2.0 * p_.dL_max + 2.0 * g.resolution();
    for (std::size_t q = 0; q + 1 < n_; ++q) {
      const std::array<Vec2, 4> v{work_.left[q].position(), work_.left[q + 1].position(),
                                  work_.right[q + 1].position(), work_.right[q].position()};
      Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
      Vec2 hi = -1.0 * lo;
      for (const Vec2& pt : v) {
        lo = {std::min(lo.x, pt.x), std::min(lo.y, pt.y)};
        hi = {std::max(hi.x, pt.x), std::max(hi.y, pt.y)};
      }
      const CellIndex c0 = g.world_to_cell(lo - Vec2{reach, reach});
      const CellIndex c1 = g.world_to_cell(hi + Vec2{reach, reach});
      for (int j = std::max(c0.j, 0); j <= std::min(c1.j, g.height() - 1); ++j) {
        for (int i = std::max(c0.i, 0); i <= std::min(c1.i, g.width() - 1); ++i) {
          if (!boundary[g.index({i, j})]) continue;
          if (detail::hull_box_separation(v, cell_box(g, {i, j}), nullptr) > reach) continue;
          rows_.push_back({RowType::kEnclosure, q, 0, CellIndex{i, j}});
        }
      }
    }
  }

  DuoTrajectory work_;
  int active_;
  const Environment& env_;
  CostParams p_;
  const OptimizerConfig& cfg_;
  Margins m_;
  std::size_t n_;
  bool free_ = false;
  int nv_ = 0;
  std::vector<double> band_;
  std::vector<Row> rows_;
};

// ---------------------------------------------------------------------------
// Alternation

struct HalfResult {
  DuoTrajectory duo;
  double d_max = 0.0;
  bool changed = false;
  int attempts = 0;
};

/// Exact duo cost at a given net length.
inline CostBreakdown exact_cost(const DuoTrajectory& duo, const Environment& env, const CostParams& p,
                                ExpansionMode mode) {
  CostBreakdown c = duo_total_cost(duo, env.inflated, env.circles, p);
  if (mode != ExpansionMode::kUShape) {
    c.total -= p.a4 * c.J_e;
  }
  return c;
}

/// Optimizes the interior poses of `active` (1 = left, 2 = right) with the
/// other robot frozen. The result never has a higher exact cost than the
/// start when the start is feasible; otherwise it must reduce the number of
/// exact violations or keep it while lowering the cost.
inline HalfResult optimize_half(const DuoTrajectory& start, int active, const Environment& env, const CostParams& p,
                                const OptimizerConfig& cfg) {
  const double res = env.inflated.resolution();
  HalfResult out{start, p.d_max, false, 0};
  if (start.size() < 3) return out;

  const FeasibilityReport rep0 = check_feasibility(start, env, p, cfg.expansion, cfg.hard_tolerance);
  const double J0 = exact_cost(start, env, p, cfg.expansion).total;
  const std::size_t v0 = rep0.count();

  DuoTrajectory seed = start;
  CostParams pseed = p;  // escalations restart from the accepted candidate and its net length
  if (cfg.expansion == ExpansionMode::kUShape) detail::repair_separation(seed, active, p);
  Margins m{cfg.clearance_margin * res, cfg.coverage_margin * res, cfg.enclosure_margin * res,
            cfg.intrusion_margin * res, 1e-3};
  std::size_t best_count = v0;
  double best_J = J0;

  for (int attempt = 0; attempt <= cfg.escalations; ++attempt) {
    out.attempts = attempt + 1;
    HalfProblem hp(seed, active, env, pseed, cfg, m);
    nlp::Problem prob;
    prob.x0 = hp.initial();
    hp.bounds(prob.lower, prob.upper);
    prob.objective = [&](const nlp::Vector& x, nlp::Vector* g) { return hp.objective(x, g); };
    prob.num_constraints = hp.num_constraints();
    prob.constraints = [&](const nlp::Vector& x, nlp::Vector& g, std::vector<nlp::JacEntry>* j) {
      hp.constraints(x, g, j);
    };
    const nlp::Result r = nlp::solve(prob, cfg.solver);
    const CostParams pr = hp.apply(r.x);
    const DuoTrajectory cand = hp.trajectory();
    const FeasibilityReport rep = check_feasibility(cand, env, pr, cfg.expansion, cfg.hard_tolerance);
    const double J = exact_cost(cand, env, pr, cfg.expansion).total;
    // Feasible starts only move to feasible points of no higher cost;
    // infeasible ones accept fewer violations, or as many at lower cost.
    const bool accept = v0 == 0 ? (rep.ok() && J <= best_J)
                                : (rep.count() < best_count || (rep.count() == best_count && J <= best_J));
    if (accept) {
      out.duo = cand;
      out.d_max = pr.d_max;
      out.changed = true;
      best_count = rep.count();
      best_J = J;
      if (rep.ok()) return out;
      seed = cand;
      pseed = pr;
    }
    m.clearance *= 1.5;
    m.coverage *= 2.0;
    m.enclosure *= 2.0;
    m.intrusion *= 2.0;
    m.relative *= 4.0;
  }
  return out;
}

struct IterationRecord {
  int step = 0;
  int robot = 0;  // 0 for the initial trajectory
  CostBreakdown cost;
  double d_max = 0.0;
  bool feasible = false;
};

struct OptimizeResult {
  DuoTrajectory duo;
  double d_max = 0.0;
  std::vector<IterationRecord> log;
  FeasibilityReport report;
};

/// Alternates left (odd steps) and right (even steps) for N_total steps.
/// Throws InfeasibleError when the final trajectory violates a hard
/// constraint, unless cfg.require_feasible is off.
inline OptimizeResult optimize_duo(const DuoTrajectory& baseline, const Environment& env, const CostParams& params,
                                   const OptimizerConfig& cfg) {
  validate(baseline);
  cfg.validate();
  params.validate();
  CostParams p = params;
  if (cfg.net_length == NetLengthMode::kFree) p.d_max = double(baseline.size()) * p.dL_max;

  OptimizeResult out;
  out.duo = baseline;
  auto record = [&](int step, int robot) {
    IterationRecord rec;
    rec.step = step;
    rec.robot = robot;
    rec.cost = exact_cost(out.duo, env, p, cfg.expansion);
    rec.d_max = p.d_max;
    rec.feasible = check_feasibility(out.duo, env, p, cfg.expansion, cfg.hard_tolerance).ok();
    out.log.push_back(rec);
  };
  record(0, 0);
  for (int step = 1; step <= cfg.N_total; ++step) {
    const int robot = step % 2 == 1 ? 1 : 2;
    const HalfResult h = optimize_half(out.duo, robot, env, p, cfg);
    out.duo = h.duo;
    p.d_max = h.d_max;
    record(step, robot);
  }
  out.d_max = p.d_max;
  out.report = check_feasibility(out.duo, env, p, cfg.expansion, cfg.hard_tolerance);
  if (cfg.require_feasible && !out.report.ok()) {
    throw InfeasibleError("no feasible trajectory after " + std::to_string(cfg.N_total) +
                          " alternation steps: " + out.report.summary());
  }
  return out;
}

/// Cost parameters of a result (the net length may have been optimized).
inline CostParams result_params(const CostParams& p, const OptimizeResult& r) { return p.with_net_length(r.d_max); }

inline void write_iteration_log_csv(std::ostream& os, const std::vector<IterationRecord>& log) {
  os << "step,robot,J_total,J_dist,J_obs,J_e,J_s,d_max,feasible\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%d\n", r.step,
                  r.robot == 0 ? "init" : (r.robot == 1 ? "left" : "right"), r.cost.total, r.cost.J_dist,
                  r.cost.J_obs, r.cost.J_e, r.cost.J_s, r.d_max, r.feasible ? 1 : 0);
    os << buf;
  }
}

}  // namespace tduo
