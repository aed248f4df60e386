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

// Reduced nonholonomic dynamics of a differential-drive robot, the lumped
// net/payload drag and object pickup along the swept net mouth.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tduo/common.hpp"
#include "tduo/environment.hpp"
#include "tduo/geometry.hpp"

namespace tduo {

using Vector2 = Eigen::Vector2d;
using Matrix2 = Eigen::Matrix2d;
using Matrix3 = Eigen::Matrix3d;
using Matrix32 = Eigen::Matrix<double, 3, 2>;

struct RobotParams {
  double m = 1.43;       // kg
  double J = 0.146;      // kg m^2
  double R = 0.144;      // half wheel track, m
  double r = 0.033;      // wheel radius, m
  double d = 0.020;      // origin to CoM, m
  double tau_max = 3.0;  // N m per wheel

  void validate() const {
    if (!(m > 0.0 && J > 0.0 && R > 0.0 && r > 0.0 && tau_max > 0.0 && d >= 0.0)) {
      throw ValidationError("robot parameters must be positive (d >= 0)");
    }
    if (!(J - m * d * d > 0.0)) throw ValidationError("J must exceed m d^2");
  }
};

/// Configuration q = [x, y, phi] and body velocity v = [nu, omega].
struct WmrState {
  Pose q;
  double nu = 0.0;
  double omega = 0.0;

  Vector2 v() const { return {nu, omega}; }
};

/// Wheel torques; index 0 drives +omega (right wheel), index 1 the left.
using Torques = Vector2;

inline Matrix3 inertia_matrix(double phi, const RobotParams& p) {
  const double s = std::sin(phi), c = std::cos(phi), md = p.m * p.d;
  Matrix3 M;
  M << p.m, 0.0, md * s, 0.0, p.m, -md * c, md * s, -md * c, p.J;
  return M;
}

/// Coriolis/centrifugal matrix consistent with inertia_matrix.
inline Matrix3 coriolis_matrix(double phi, double phidot, const RobotParams& p) {
  const double md = p.m * p.d;
  Matrix3 C = Matrix3::Zero();
  C(0, 2) = md * phidot * std::cos(phi);
  C(1, 2) = md * phidot * std::sin(phi);
  return C;
}

inline Matrix32 input_matrix(double phi, const RobotParams& p) {
  Matrix32 B;
  B << std::cos(phi), std::cos(phi), std::sin(phi), std::sin(phi), p.R, -p.R;
  return B / p.r;
}

/// Basis S(q) of the nullspace of A(q) = [-sin, cos, -d].
inline Matrix32 kinematic_basis(double phi, const RobotParams& p) {
  Matrix32 S;
  S << std::cos(phi), -p.d * std::sin(phi), std::sin(phi), p.d * std::cos(phi), 0.0, 1.0;
  return S;
}

inline Matrix32 kinematic_basis_dot(double phi, double phidot, const RobotParams& p) {
  Matrix32 S;
  S << -std::sin(phi), -p.d * std::cos(phi), std::cos(phi), -p.d * std::sin(phi), 0.0, 0.0;
  return phidot * S;
}

struct ReducedMatrices {
  Matrix2 M;
  Matrix2 C;
  Matrix2 B;
};

inline ReducedMatrices reduced_matrices(const WmrState& s, const RobotParams& p) {
  const double phi = s.q.phi;
  const Matrix32 S = kinematic_basis(phi, p);
  const Matrix32 Sd = kinematic_basis_dot(phi, s.omega, p);
  const Matrix3 M = inertia_matrix(phi, p);
  ReducedMatrices out;
  out.M = S.transpose() * M * S;
  out.C = S.transpose() * M * Sd + S.transpose() * coriolis_matrix(phi, s.omega, p) * S;
  out.B = S.transpose() * input_matrix(phi, p);
  return out;
}

/// |A(q) qdot| with qdot = S(q) v.
inline double nonholonomic_residual(const WmrState& s, const RobotParams& p) {
  const Eigen::Vector3d qd = kinematic_basis(s.q.phi, p) * s.v();
  return std::abs(-std::sin(s.q.phi) * qd(0) + std::cos(s.q.phi) * qd(1) - p.d * qd(2));
}

/// Constraint force lambda = -m (xdot cos phi + ydot sin phi) phidot.
inline double constraint_force(const WmrState& s, const RobotParams& p) {
  const Eigen::Vector3d qd = kinematic_basis(s.q.phi, p) * s.v();
  return -p.m * (qd(0) * std::cos(s.q.phi) + qd(1) * std::sin(s.q.phi)) * qd(2);
}

inline double kinetic_energy(const WmrState& s, const RobotParams& p) {
  const Vector2 v = s.v();
  return 0.5 * v.dot(reduced_matrices(s, p).M * v);
}

/// Generalized disturbance force as a function of body velocity.
using Disturbance = std::function<Vector2(const Vector2& v)>;

struct StepResult {
  WmrState state;
  bool saturated = false;
};

/// One RK4 step of M v' + C v = B tau + f(v), q' = S(q) v. Torques beyond
/// tau_max are clamped and flagged.
inline StepResult step_with(const WmrState& s, const Torques& tau_in, const Disturbance& f, double dt,
                            const RobotParams& p) {
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  StepResult out;
  Torques tau = tau_in;
  for (int k = 0; k < 2; ++k) {
    if (std::abs(tau(k)) > p.tau_max) {
      tau(k) = std::clamp(tau(k), -p.tau_max, p.tau_max);
      out.saturated = true;
    }
  }
  using Vec5 = Eigen::Matrix<double, 5, 1>;
  auto rhs = [&](const Vec5& y) {
    WmrState w{{y(0), y(1), y(2)}, y(3), y(4)};
    const ReducedMatrices rm = reduced_matrices(w, p);
    const Vector2 v = w.v();
    Vector2 force = rm.B * tau - rm.C * v;
    if (f) force += f(v);
    const Vector2 vd = rm.M.ldlt().solve(force);
    const Eigen::Vector3d qd = kinematic_basis(w.q.phi, p) * v;
    Vec5 d;
    d << qd, vd;
    return d;
  };
  Vec5 y;
  y << s.q.x, s.q.y, s.q.phi, s.nu, s.omega;
  const Vec5 k1 = rhs(y);
  const Vec5 k2 = rhs(y + 0.5 * dt * k1);
  const Vec5 k3 = rhs(y + 0.5 * dt * k2);
  const Vec5 k4 = rhs(y + dt * k3);
  y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!y.allFinite()) throw NumericError("robot state became non-finite");
  out.state = {{y(0), y(1), y(2)}, y(3), y(4)};
  return out;
}

inline StepResult step(const WmrState& s, const Torques& tau, const Vector2& disturbance, double dt,
                       const RobotParams& p) {
  return step_with(s, tau, [disturbance](const Vector2&) { return disturbance; }, dt, p);
}

// ---------------------------------------------------------------------------
// Net and payload

/// Lumped drag of the net and the objects it holds.
struct NetPayloadModel {
  double net_length = 2.0;    // m, arc length of the net
  double base_mass = 0.0;     // kg, the net itself
  double gathered_mass = 0.0;  // kg, grows during a run
  double c0 = 0.05;           // N s/m, base friction of the net
  double c1 = 5.0;            // N s/(m kg), per gathered kilogram
  double kappa = 0.1;         // m^2 scale of the yaw component

  void validate() const {
    if (!(net_length > 0.0)) throw ValidationError("net length must be > 0");
    if (!(base_mass >= 0.0 && gathered_mass >= 0.0 && c0 >= 0.0 && c1 >= 0.0 && kappa >= 0.0)) {
      throw ValidationError("net payload coefficients must be >= 0");
    }
  }
};

inline Vector2 net_drag(const NetPayloadModel& m, const Vector2& v) {
  const double c = m.c0 + m.c1 * m.gathered_mass;
  return {-c * v(0), -c * m.kappa * v(1)};
}

/// Depth of a half ellipse whose chord is `chord` and half perimeter `arc`
/// (Ramanujan's perimeter). Zero when the net is taut.
inline double half_ellipse_depth(double chord, double arc) {
  const double a = 0.5 * chord;
  auto half = [a](double b) {
    return 0.5 * kPi * (3.0 * (a + b) - std::sqrt((3.0 * a + b) * (a + 3.0 * b)));
  };
  if (half(0.0) >= arc) return 0.0;
  double lo = 0.0, hi = arc;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (half(mid) < arc ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Closed polygon of the net: the half ellipse from the left robot to the
/// right one, bulging behind the duo. The chord closes the polygon.
inline std::vector<Vec2> net_polygon(Vec2 left, Vec2 right, double net_length, int samples = 32) {
  const Vec2 u = left - right;
  const double chord = norm(u);
  std::vector<Vec2> poly;
  if (chord <= 0.0) return {left};
  const Vec2 ex = (1.0 / chord) * u;
  const Vec2 behind{-ex.y, ex.x};  // the left robot sits to the left of travel
  const Vec2 mid = 0.5 * (left + right);
  const double a = 0.5 * chord, b = half_ellipse_depth(chord, net_length);
  poly.reserve(static_cast<std::size_t>(samples) + 1);
  for (int k = 0; k <= samples; ++k) {
    const double t = kPi * k / samples;
    poly.push_back(mid + (a * std::cos(t)) * ex + (b * std::sin(t)) * behind);
  }
  return poly;
}

struct PickupEvent {
  int object = 0;
  double mass = 0.0;
};

/// Marks objects swept by the net mouth (the chord between the robots)
/// moving from (left0, right0) to (left1, right1) and adds their mass.
inline std::vector<PickupEvent> gathering_events(Vec2 left0, Vec2 right0, Vec2 left1, Vec2 right1,
                                                 const std::vector<Object>& objects, std::vector<char>& gathered,
                                                 NetPayloadModel& model) {
  std::vector<PickupEvent> out;
  gathered.resize(objects.size(), 0);
  for (std::size_t k = 0; k < objects.size(); ++k) {
    if (gathered[k]) continue;
    const Vec2 p = objects[k].position;
    const bool hit = point_in_triangle(p, left0, left1, right1, 1e-12) ||
                     point_in_triangle(p, left0, right1, right0, 1e-12) ||
                     point_in_triangle(p, left0, left1, right0, 1e-12) ||
                     point_in_triangle(p, left1, right1, right0, 1e-12);
    if (!hit) continue;
    gathered[k] = 1;
    model.gathered_mass += objects[k].mass_kg;
    out.push_back({static_cast<int>(k), objects[k].mass_kg});
  }
  return out;
}

}  // namespace tduo
