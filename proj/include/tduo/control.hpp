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

// Tracking controllers for one robot: the kinematic reference-velocity law,
// the model-based torque law and model reference adaptive control.

#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "tduo/common.hpp"
#include "tduo/dynamics.hpp"

namespace tduo {

struct TrackingGains {
  double k1 = 1.0;
  double k2 = 20.0;
  double k3 = 2.5;

  void validate() const {
    if (!(k1 > 0.0 && k2 > 0.0 && k3 > 0.0)) throw ValidationError("tracking gains must be > 0");
  }
};

/// Reference pose with its body velocity.
struct ReferencePoint {
  Pose pose;
  double nu = 0.0;
  double omega = 0.0;
};

/// Pose error expressed in the robot frame; ephi wrapped to (-pi, pi].
struct TrackingError {
  double ex = 0.0;
  double ey = 0.0;
  double ephi = 0.0;
};

inline TrackingError tracking_error(const Pose& ref, const Pose& q) {
  const double dx = ref.x - q.x, dy = ref.y - q.y;
  const double c = std::cos(q.phi), s = std::sin(q.phi);
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(ref.phi - q.phi)};
}

/// Desired body velocity that steers the robot onto the reference.
inline Vector2 reference_velocity(const ReferencePoint& ref, const WmrState& s, const TrackingGains& g, double d,
                                  TrackingError* err = nullptr) {
  const TrackingError e = tracking_error(ref.pose, s.q);
  if (err) *err = e;
  const double ce = std::cos(e.ephi), se = std::sin(e.ephi);
  return {ref.nu * ce + g.k1 * (e.ex + d * (1.0 - ce)),
          ref.omega + g.k2 * ref.nu * (e.ey - d * se + g.k3 * ref.nu * se)};
}

struct TorqueCommand {
  Torques tau = Torques::Zero();
  bool saturated = false;
};

inline TorqueCommand saturate(const Torques& tau, double tau_max) {
  TorqueCommand out{tau, false};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(tau(k)) > tau_max) {
      out.tau(k) = std::clamp(tau(k), -tau_max, tau_max);
      out.saturated = true;
    }
  }
  return out;
}

/// tau = B^-1 (M vd' + C vd) with the nominal model.
inline TorqueCommand model_based_torque(const Vector2& vd, const Vector2& vd_dot, const WmrState& s,
                                        const RobotParams& p) {
  const ReducedMatrices rm = reduced_matrices(s, p);
  return saturate(rm.B.inverse() * (rm.M * vd_dot + rm.C * vd), p.tau_max);
}

// ---------------------------------------------------------------------------
// Model reference adaptive control

/// Solves A' P + P A = -Q for a 2x2 Hurwitz A.
inline Matrix2 solve_lyapunov(const Matrix2& A, const Matrix2& Q) {
  // Column-major vec: entry (i, j) of A'P + PA against entry (k, l) of P.
  Eigen::Matrix4d L = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        L(i + 2 * j, k + 2 * j) += A(k, i);
        L(i + 2 * j, i + 2 * k) += A(k, j);
      }
    }
  }
  const Eigen::Vector4d q = -Eigen::Map<const Eigen::Vector4d>(Q.data());
  const Eigen::Vector4d p = L.colPivHouseholderQr().solve(q);
  Matrix2 P = Eigen::Map<const Matrix2>(p.data());
  return 0.5 * (P + P.transpose());
}

struct MracConfig {
  Matrix2 K = 4.0 * Matrix2::Identity();
  Matrix2 gamma_x = 20.0 * Matrix2::Identity();
  Matrix2 gamma_m = 20.0 * Matrix2::Identity();
  Matrix2 Q = Matrix2::Identity();
  double bound = 50.0;  // per-entry projection radius of the adaptive matrices

  void validate() const {
    const Eigen::EigenSolver<Matrix2> es(-K);
    if (!(es.eigenvalues().real().maxCoeff() < 0.0)) throw ValidationError("-K must be Hurwitz");
    if (!(bound > 0.0)) throw ValidationError("projection radius must be > 0");
    if (!(gamma_x.allFinite() && gamma_m.allFinite())) throw ValidationError("adaptation gains must be finite");
  }
};

struct MracState {
  MracConfig cfg;
  Matrix2 P = Matrix2::Identity();
  Matrix2 dx = Matrix2::Zero();  // Delta_X
  Matrix2 dm = Matrix2::Zero();  // Delta_m

  explicit MracState(const MracConfig& c = {}) : cfg(c) {
    cfg.validate();
    P = solve_lyapunov(-cfg.K, cfg.Q);
  }
};

struct MracOutput {
  TorqueCommand cmd;
  Vector2 u = Vector2::Zero();  // generalized control before torque recovery
  Vector2 e = Vector2::Zero();  // reference-model error Xm - X
  bool bounded = false;         // an adaptive entry sat on the projection radius
};

/// Adaptive law u = (-K X + um) + (-Delta_X X + Delta_m um) with um = vd' + K vd.
inline Vector2 mrac_control(const MracState& st, const Vector2& v, const Vector2& vd, const Vector2& vd_dot,
                            Vector2* um_out = nullptr) {
  const Vector2 um = vd_dot + st.cfg.K * vd;
  if (um_out) *um_out = um;
  return (-st.cfg.K * v + um) + (-st.dx * v + st.dm * um);
}

/// Forward-Euler update of the adaptive matrices with e = Xm - X, projected
/// entrywise onto [-bound, bound]. Returns true when the projection acted.
inline bool mrac_update(MracState& st, const Vector2& e, const Vector2& v, const Vector2& um, double dt) {
  const Vector2 pe = st.P * e;
  st.dx += dt * (-st.cfg.gamma_x * pe * v.transpose());
  st.dm += dt * (st.cfg.gamma_m * pe * um.transpose());
  bool hit = false;
  for (Matrix2* m : {&st.dx, &st.dm}) {
    for (int k = 0; k < 4; ++k) {
      double& a = m->data()[k];
      if (std::abs(a) > st.cfg.bound) {
        a = std::clamp(a, -st.cfg.bound, st.cfg.bound);
        hit = true;
      }
    }
  }
  return hit;
}

/// One controller tick. The known model supplies M_k and C_k; the reference
/// model derivative vd' stands in for the measured acceleration.
inline MracOutput mrac_step(const WmrState& s, const Vector2& vd, const Vector2& vd_dot, MracState& st,
                            const RobotParams& known, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  MracOutput out;
  const Vector2 v = s.v();
  Vector2 um;
  out.u = mrac_control(st, v, vd, vd_dot, &um);
  const ReducedMatrices rm = reduced_matrices(s, known);
  const Vector2 tau_bar = out.u + (rm.M - Matrix2::Identity()) * vd_dot + rm.C * v;
  out.cmd = saturate(rm.B.inverse() * tau_bar, known.tau_max);
  out.e = vd - v;
  out.bounded = mrac_update(st, out.e, v, um, dt);
  if (!st.dx.allFinite() || !st.dm.allFinite()) throw NumericError("adaptive matrices became non-finite");
  return out;
}

}  // namespace tduo
