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

// Planning pipeline, closed-loop duo simulation, study drivers and the
// CSV/SVG/JSON writers behind the command-line tool.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tduo/baseline.hpp"
#include "tduo/centerline.hpp"
#include "tduo/control.hpp"
#include "tduo/costs.hpp"
#include "tduo/dynamics.hpp"
#include "tduo/environment.hpp"
#include "tduo/optimizer.hpp"

namespace tduo {

// ---------------------------------------------------------------------------
// Planning

struct PlanRequest {
  int N = 100;
  std::optional<double> net_length;  // empty: estimate it (auto)
  OptimizerConfig optimizer;
};

struct PlanResult {
  Environment env;
  DuoTrajectory baseline;
  DuoTrajectory duo;
  CostParams params;  // with the net length that was used
  CostBreakdown cost;
  std::vector<IterationRecord> log;
  FeasibilityReport report;
  bool estimated = false;  // net length came from auto mode
};

inline std::string to_string(ExpansionMode m) {
  switch (m) {
    case ExpansionMode::kUShape: return "ushape";
    case ExpansionMode::kNone: return "none";
    case ExpansionMode::kHard: return "hard";
  }
  return "ushape";
}

inline ExpansionMode parse_expansion_mode(const std::string& s) {
  if (s == "ushape") return ExpansionMode::kUShape;
  if (s == "none") return ExpansionMode::kNone;
  if (s == "hard") return ExpansionMode::kHard;
  throw ValidationError("unknown expansion mode '" + s + "' (ushape, none, hard)");
}

namespace detail {

inline PlanResult plan_fixed(const Scenario& sc, Environment env, const DuoTrajectory& baseline, CostParams p,
                             const OptimizerConfig& cfg) {
  OptimizerConfig c = cfg;
  c.net_length = NetLengthMode::kFixed;
  const OptimizeResult r = optimize_duo(baseline, env, p, c);
  PlanResult out;
  out.env = std::move(env);
  out.baseline = baseline;
  out.duo = r.duo;
  out.params = p.with_net_length(r.d_max);
  out.cost = exact_cost(r.duo, out.env, out.params, c.expansion);
  out.log = r.log;
  out.report = r.report;
  (void)sc;
  return out;
}

}  // namespace detail

/// Centerline, baseline and alternating optimization for one scenario. In
/// auto mode the net length is optimized jointly, then the trajectory is
/// re-planned at that length from the baseline; the cheaper of the two wins.
inline PlanResult plan_scenario(const Scenario& sc, const PlanRequest& req) {
  CostParams p = CostParams::from_scenario(sc);
  if (req.net_length) p.d_max = *req.net_length;
  p.validate();
  const double cap = double(req.N) * p.dL_max;
  Environment env = build_environment(sc, req.net_length ? std::optional<double>(p.d_max) : std::optional(cap));
  const Centerline cl = plan_centerline(sc, env.inflated, env.circles, {.num_points = req.N});
  const DuoTrajectory baseline = build_baseline(cl, env.circles, p.l, sc.start, sc.end).duo;
  if (req.net_length) return detail::plan_fixed(sc, std::move(env), baseline, p, req.optimizer);

  OptimizerConfig free_cfg = req.optimizer;
  free_cfg.net_length = NetLengthMode::kFree;
  free_cfg.expansion = ExpansionMode::kUShape;
  const OptimizeResult fr = optimize_duo(baseline, env, p, free_cfg);
  const CostParams pf = p.with_net_length(fr.d_max);
  PlanResult out;
  out.env = env;
  out.baseline = baseline;
  out.duo = fr.duo;
  out.params = pf;
  out.cost = exact_cost(fr.duo, env, pf, ExpansionMode::kUShape);
  out.log = fr.log;
  out.report = fr.report;
  out.estimated = true;
  try {
    PlanResult fixed = detail::plan_fixed(sc, std::move(env), baseline, pf, req.optimizer);
    if (fixed.cost.total < out.cost.total) {
      fixed.estimated = true;
      fixed.log = out.log;  // the estimation run is the one worth logging
      return fixed;
    }
  } catch (const InfeasibleError&) {
  }
  return out;
}

// ---------------------------------------------------------------------------
// Timed reference

struct TimedReference {
  double dt = 0.01;
  std::vector<ReferencePoint> left, right;  // one entry per controller tick
  std::vector<double> waypoint_times;       // time at which waypoint i is due
  double duration = 0.0;                    // end of motion

  std::size_t ticks() const { return left.size(); }
};

/// Uniform Catmull-Rom point on the segment p1 -> p2 and its derivative in u.
inline Vec2 catmull_rom(Vec2 p0, Vec2 p1, Vec2 p2, Vec2 p3, double u, Vec2* deriv = nullptr) {
  const double u2 = u * u, u3 = u2 * u;
  const Vec2 a = 2.0 * p1;
  const Vec2 b = p2 - p0;
  const Vec2 c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
  const Vec2 d = -1.0 * p0 + 3.0 * p1 - 3.0 * p2 + p3;
  if (deriv) *deriv = 0.5 * (b + 2.0 * u * c + 3.0 * u2 * d);
  return 0.5 * (a + u * b + u2 * c + u3 * d);
}

namespace detail {

inline std::vector<ReferencePoint> time_robot(const PoseSeq& s, const std::vector<double>& t_way, double dt,
                                              std::size_t ticks) {
  const std::size_t n = s.size();
  std::vector<Vec2> pos(ticks);
  std::vector<double> head(ticks);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < ticks; ++k) {
    const double t = std::min(double(k) * dt, t_way.back());
    while (seg + 2 < n && t >= t_way[seg + 1]) ++seg;
    const double span = t_way[seg + 1] - t_way[seg];
    const double u = span > 0.0 ? std::clamp((t - t_way[seg]) / span, 0.0, 1.0) : 1.0;
    const Vec2 p0 = s[seg == 0 ? 0 : seg - 1].position();
    const Vec2 p3 = s[std::min(seg + 2, n - 1)].position();
    pos[k] = catmull_rom(p0, s[seg].position(), s[seg + 1].position(), p3, u);
  }
  // Heading points at the first later reference point kLookAhead away, so a
  // robot that pauses keeps facing where it will go next.
  constexpr double kLookAhead = 0.02;
  double last_heading = s.front().phi;
  std::size_t j = 0;
  for (std::size_t k = 0; k < ticks; ++k) {
    j = std::max(j, k + 1);
    while (j < ticks && distance(pos[j], pos[k]) < kLookAhead) ++j;
    if (j < ticks) {
      const Vec2 d = pos[j] - pos[k];
      last_heading = std::atan2(d.y, d.x);
    }
    head[k] = last_heading;
  }
  std::vector<ReferencePoint> out(ticks);
  for (std::size_t k = 0; k < ticks; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = std::min(k + 1, ticks - 1);
    const double h = double(b - a) * dt;
    out[k].pose = {pos[k].x, pos[k].y, head[k]};
    if (h > 0.0) {
      out[k].nu = distance(pos[b], pos[a]) / h;
      out[k].omega = wrap_angle(head[b] - head[a]) / h;
    }
  }
  return out;
}

}  // namespace detail

/// Times the planned waypoints so that both robots reach waypoint i
/// together and the faster of the two moves at v_ref. Headings follow the
/// direction of travel; nu and omega are central differences of the timed
/// path.
/// After the last waypoint the reference holds for `hold` seconds.
inline TimedReference build_reference(const DuoTrajectory& duo, double v_ref, double dt, double hold) {
  validate(duo);
  if (!(v_ref > 0.0 && dt > 0.0 && hold >= 0.0)) throw ValidationError("v_ref and dt must be > 0");
  TimedReference r;
  r.dt = dt;
  const std::size_t n = duo.size();
  r.waypoint_times.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double len = std::max(distance(duo.left[i].position(), duo.left[i - 1].position()),
                                distance(duo.right[i].position(), duo.right[i - 1].position()));
    r.waypoint_times[i] = r.waypoint_times[i - 1] + len / v_ref;
  }
  r.duration = r.waypoint_times.back();
  const auto ticks = static_cast<std::size_t>(std::ceil((r.duration + hold) / dt - 1e-9)) + 1;
  r.left = detail::time_robot(duo.left, r.waypoint_times, dt, ticks);
  r.right = detail::time_robot(duo.right, r.waypoint_times, dt, ticks);
  return r;
}

inline void write_reference_csv(std::ostream& os, const TimedReference& r) {
  os << "t,robot,x,y,phi,nu,omega\n";
  char buf[256];
  for (std::size_t k = 0; k < r.ticks(); ++k) {
    for (int w = 0; w < 2; ++w) {
      const ReferencePoint& p = w == 0 ? r.left[k] : r.right[k];
      std::snprintf(buf, sizeof buf, "%.9f,%s,%.9f,%.9f,%.9f,%.9f,%.9f\n", double(k) * r.dt,
                    w == 0 ? "left" : "right", p.pose.x, p.pose.y, p.pose.phi, p.nu, p.omega);
      os << buf;
    }
  }
}

// ---------------------------------------------------------------------------
// Closed-loop simulation

enum class ControllerKind { kMrac, kModelBased };

inline std::string to_string(ControllerKind c) { return c == ControllerKind::kMrac ? "mrac" : "model-based"; }

inline ControllerKind parse_controller(const std::string& s) {
  if (s == "mrac") return ControllerKind::kMrac;
  if (s == "model-based") return ControllerKind::kModelBased;
  throw ValidationError("unknown controller '" + s + "' (mrac, model-based)");
}

struct SimConfig {
  ControllerKind controller = ControllerKind::kMrac;
  RobotParams robot;
  TrackingGains gains;
  MracConfig mrac;
  NetPayloadModel net;
  double v_ref = 0.15;         // m/s
  double control_rate = 100.0;  // Hz
  double torque_rate = 500.0;   // Hz
  double hold = 2.0;            // s simulated after the last waypoint
  double window = 2.0;          // s, failure window
  double rms_threshold = 0.5;   // m, failure when a window RMS exceeds it
  double collision_distance = 0.1;  // m between robot origins

  void validate() const {
    robot.validate();
    gains.validate();
    mrac.validate();
    net.validate();
    if (!(v_ref > 0.0 && control_rate > 0.0 && torque_rate >= control_rate && hold >= 0.0 && window > 0.0 &&
          rms_threshold > 0.0 && collision_distance >= 0.0)) {
      throw ValidationError("invalid simulation settings");
    }
    const double sub = torque_rate / control_rate;
    if (std::abs(sub - std::round(sub)) > 1e-9) throw ValidationError("torque rate must be a multiple of control rate");
  }

  /// Defaults overridden by a scenario's `params` map.
  static SimConfig from_scenario(const Scenario& sc) {
    SimConfig c;
    c.v_ref = sc.param("v_ref", c.v_ref);
    c.net.c0 = sc.param("drag_c0", c.net.c0);
    c.net.c1 = sc.param("drag_c1", c.net.c1);
    c.net.kappa = sc.param("drag_kappa", c.net.kappa);
    c.net.base_mass = sc.param("net_mass", c.net.base_mass);
    c.gains.k1 = sc.param("k_1", c.gains.k1);
    c.gains.k2 = sc.param("k_2", c.gains.k2);
    c.gains.k3 = sc.param("k_3", c.gains.k3);
    c.hold = sc.param("hold_s", c.hold);
    return c;
  }
};

struct StateLogRow {
  double t;
  int robot;  // 1 left, 2 right
  WmrState s;
  Torques tau;
  double gathered_mass;
};

struct ControlLogRow {
  double t;
  int robot;
  TrackingError e;
  Vector2 vd;
  Torques tau;
  double dx_norm;
  double dm_norm;
  bool saturated;
};

struct SimResult {
  std::vector<StateLogRow> states;
  std::vector<ControlLogRow> control;
  std::vector<PickupEvent> pickups;
  DuoTrajectory executed;  // robot poses at the waypoint times
  int gathered = 0;
  double rms[2] = {0.0, 0.0};  // full-run position RMS, left/right
  double max_window_rms = 0.0;
  bool failed = false;
  double failure_time = -1.0;
  std::string failure_mode = "none";  // none, tracking, robot-robot collision, obstacle collision
  bool halted = false;
  int saturated_ticks = 0;
  bool adaptation_bounded = false;
};

namespace detail {

inline bool in_obstacle(const OccupancyGrid& g, Vec2 p) {
  const CellIndex c = g.world_to_cell(p);
  if (c.i < 0 || c.j < 0 || c.i >= g.width() || c.j >= g.height()) return true;
  return g.at(c.i, c.j) == Cell::kObstacle;
}

}  // namespace detail

/// Tracks the planned duo trajectory with the chosen controller on the
/// reduced dynamics, with net drag growing as objects are swept up.
inline SimResult simulate(const Scenario& sc, const DuoTrajectory& plan, double net_length, const SimConfig& cfg_in) {
  SimConfig cfg = cfg_in;
  cfg.net.net_length = net_length;
  cfg.net.gathered_mass = 0.0;
  cfg.validate();
  const double dt = 1.0 / cfg.control_rate;
  const int sub = static_cast<int>(std::lround(cfg.torque_rate / cfg.control_rate));
  const TimedReference ref = build_reference(plan, cfg.v_ref, dt, cfg.hold);

  SimResult out;
  WmrState st[2];
  st[0].q = ref.left.front().pose;
  st[1].q = ref.right.front().pose;
  MracState mrac[2] = {MracState(cfg.mrac), MracState(cfg.mrac)};
  Vector2 vd_prev[2] = {Vector2::Zero(), Vector2::Zero()};
  std::vector<char> gathered;
  NetPayloadModel net = cfg.net;
  const auto window = static_cast<std::size_t>(std::lround(cfg.window / dt));
  std::deque<double> sq[2];
  double win_sum[2] = {0.0, 0.0}, total_sq[2] = {0.0, 0.0};
  std::size_t samples = 0;

  std::vector<WmrState> at_tick[2];
  for (std::size_t k = 0; k < ref.ticks(); ++k) {
    const double t = double(k) * dt;
    Torques tau[2];
    for (int w = 0; w < 2; ++w) {
      const ReferencePoint& rp = w == 0 ? ref.left[k] : ref.right[k];
      TrackingError e;
      const Vector2 vd = reference_velocity(rp, st[w], cfg.gains, cfg.robot.d, &e);
      const Vector2 vd_dot = k == 0 ? Vector2::Zero() : Vector2((vd - vd_prev[w]) / dt);
      vd_prev[w] = vd;
      TorqueCommand cmd;
      if (cfg.controller == ControllerKind::kMrac) {
        const MracOutput mo = mrac_step(st[w], vd, vd_dot, mrac[w], cfg.robot, dt);
        cmd = mo.cmd;
        out.adaptation_bounded = out.adaptation_bounded || mo.bounded;
      } else {
        cmd = model_based_torque(vd, vd_dot, st[w], cfg.robot);
      }
      tau[w] = cmd.tau;
      if (cmd.saturated) ++out.saturated_ticks;
      out.states.push_back({t, w + 1, st[w], cmd.tau, net.gathered_mass});
      out.control.push_back({t, w + 1, e, vd, cmd.tau, mrac[w].dx.norm(), mrac[w].dm.norm(), cmd.saturated});
      at_tick[w].push_back(st[w]);

      const double err2 = std::pow(distance(rp.pose.position(), st[w].q.position()), 2);
      total_sq[w] += err2;
      sq[w].push_back(err2);
      win_sum[w] += err2;
      if (sq[w].size() > window) {
        win_sum[w] -= sq[w].front();
        sq[w].pop_front();
      }
      const double wrms = std::sqrt(std::max(0.0, win_sum[w]) / double(sq[w].size()));
      out.max_window_rms = std::max(out.max_window_rms, wrms);
      if (!out.failed && wrms > cfg.rms_threshold) {
        out.failed = true;
        out.failure_time = t;
        out.failure_mode = "tracking";
      }
    }
    ++samples;
    if (k + 1 == ref.ticks()) break;

    const Vec2 l0 = st[0].q.position(), r0 = st[1].q.position();
    for (int j = 0; j < sub; ++j) {
      for (int w = 0; w < 2; ++w) {
        st[w] = step_with(st[w], tau[w], [&](const Vector2& v) { return net_drag(net, v); }, dt / sub, cfg.robot)
                    .state;
      }
    }
    const auto ev = gathering_events(l0, r0, st[0].q.position(), st[1].q.position(), sc.objects, gathered, net);
    out.pickups.insert(out.pickups.end(), ev.begin(), ev.end());

    std::string hit;
    if (distance(st[0].q.position(), st[1].q.position()) < cfg.collision_distance) hit = "robot-robot collision";
    if (detail::in_obstacle(sc.grid, st[0].q.position()) || detail::in_obstacle(sc.grid, st[1].q.position())) {
      hit = "obstacle collision";
    }
    if (!hit.empty()) {
      if (!out.failed) {
        out.failed = true;
        out.failure_time = t + dt;
      }
      out.failure_mode = hit;
      out.halted = true;
      break;
    }
  }
  out.gathered = static_cast<int>(out.pickups.size());
  for (int w = 0; w < 2; ++w) out.rms[w] = std::sqrt(total_sq[w] / double(samples));

  const std::size_t n = plan.size();
  out.executed.left.resize(n);
  out.executed.right.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::lround(ref.waypoint_times[i] / dt)),
                                         at_tick[0].size() - 1);
    out.executed.left[i] = at_tick[0][k].q;
    out.executed.right[i] = at_tick[1][k].q;
  }
  return out;
}

inline void write_state_log_csv(std::ostream& os, const SimResult& r) {
  os << "t,robot,x,y,phi,nu,omega,tau_l,tau_r,gathered_mass\n";
  char buf[320];
  for (const StateLogRow& s : r.states) {
    std::snprintf(buf, sizeof buf, "%.9f,%s,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", s.t,
                  s.robot == 1 ? "left" : "right", s.s.q.x, s.s.q.y, s.s.q.phi, s.s.nu, s.s.omega, s.tau(1),
                  s.tau(0), s.gathered_mass);
    os << buf;
  }
}

inline void write_control_log_csv(std::ostream& os, const SimResult& r) {
  os << "t,robot,ex,ey,ephi,nu_d,omega_d,tau_l,tau_r,dxx_norm,dm_norm,saturated\n";
  char buf[360];
  for (const ControlLogRow& c : r.control) {
    std::snprintf(buf, sizeof buf, "%.9f,%s,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%d\n", c.t,
                  c.robot == 1 ? "left" : "right", c.e.ex, c.e.ey, c.e.ephi, c.vd(0), c.vd(1), c.tau(1), c.tau(0),
                  c.dx_norm, c.dm_norm, c.saturated ? 1 : 0);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Reports

struct RunReport {
  std::string scenario;
  std::string controller;
  double d_max = 0.0;
  double J_total_planned = 0.0;
  double J_dist_planned = 0.0;
  double J_total_executed = 0.0;
  double J_dist_executed = 0.0;
  int objects_total = 0;
  int objects_gathered = 0;
  double rms_left = 0.0;
  double rms_right = 0.0;
  double max_window_rms = 0.0;
  bool failed = false;
  std::string failure_mode = "none";
  double failure_time = -1.0;
  std::size_t planned_violations = 0;
  std::size_t executed_violations = 0;
  double wall_seconds = 0.0;
};

inline RunReport make_report(const Scenario& sc, const Environment& env, const DuoTrajectory& plan,
                             const CostParams& p, const SimResult& sim, ControllerKind controller) {
  RunReport r;
  r.scenario = sc.name;
  r.controller = to_string(controller);
  r.d_max = p.d_max;
  const CostBreakdown cp = exact_cost(plan, env, p, ExpansionMode::kUShape);
  const CostBreakdown ce = exact_cost(sim.executed, env, p, ExpansionMode::kUShape);
  r.J_total_planned = cp.total;
  r.J_dist_planned = cp.J_dist;
  r.J_total_executed = ce.total;
  r.J_dist_executed = ce.J_dist;
  r.objects_total = static_cast<int>(sc.objects.size());
  r.objects_gathered = sim.gathered;
  r.rms_left = sim.rms[0];
  r.rms_right = sim.rms[1];
  r.max_window_rms = sim.max_window_rms;
  r.failed = sim.failed;
  r.failure_mode = sim.failure_mode;
  r.failure_time = sim.failure_time;
  r.planned_violations = check_feasibility(plan, env, p, ExpansionMode::kUShape).count();
  r.executed_violations = check_feasibility(sim.executed, env, p, ExpansionMode::kUShape).count();
  return r;
}

inline nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["controller"] = r.controller;
  j["d_max"] = r.d_max;
  j["J_total_planned"] = r.J_total_planned;
  j["J_dist_planned"] = r.J_dist_planned;
  j["J_total_executed"] = r.J_total_executed;
  j["J_dist_executed"] = r.J_dist_executed;
  j["objects_total"] = r.objects_total;
  j["objects_gathered"] = r.objects_gathered;
  j["rms_left"] = r.rms_left;
  j["rms_right"] = r.rms_right;
  j["max_window_rms"] = r.max_window_rms;
  j["failed"] = r.failed;
  j["failure_mode"] = r.failure_mode;
  j["failure_time"] = r.failure_time;
  j["planned_violations"] = r.planned_violations;
  j["executed_violations"] = r.executed_violations;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

// ---------------------------------------------------------------------------
// Studies

struct SweepRow {
  double length = 0.0;
  std::string status = "ok";  // ok, infeasible, error
  CostBreakdown planned;
  CostBreakdown executed;
  int gathered = 0;
  double rms = 0.0;  // worse robot
  std::string failure_mode = "none";
  DuoTrajectory plan;
  std::string message;  // why a length failed
};

/// Plans and simulates every length; failures are recorded and the sweep
/// moves on.
inline std::vector<SweepRow> run_sweep(const Scenario& sc, const std::vector<double>& lengths, int N,
                                       const OptimizerConfig& opt, const SimConfig& sim) {
  if (lengths.size() < 2) throw ValidationError("a sweep needs at least two lengths");
  std::vector<SweepRow> rows;
  for (double len : lengths) {
    SweepRow row;
    row.length = len;
    try {
      const PlanResult pr = plan_scenario(sc, {N, len, opt});
      row.planned = pr.cost;
      row.plan = pr.duo;
      const SimResult sr = simulate(sc, pr.duo, pr.params.d_max, sim);
      row.executed = exact_cost(sr.executed, pr.env, pr.params, ExpansionMode::kUShape);
      row.gathered = sr.gathered;
      row.rms = std::max(sr.rms[0], sr.rms[1]);
      row.failure_mode = sr.failure_mode;
    } catch (const InfeasibleError& e) {
      row.status = "infeasible";
      row.message = e.what();
    } catch (const Error& e) {
      row.status = "error";
      row.message = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_value(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "length,status,J_total,J_dist,J_e,J_total_exec,J_dist_exec,gathered,rms,failure\n";
  for (const SweepRow& r : rows) {
    const bool ok = r.status == "ok";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    os << format_value(r.length) << ',' << r.status << ',' << format_value(ok ? r.planned.total : nan) << ','
       << format_value(ok ? r.planned.J_dist : nan) << ',' << format_value(ok ? r.planned.J_e : nan) << ','
       << format_value(ok ? r.executed.total : nan) << ',' << format_value(ok ? r.executed.J_dist : nan) << ','
       << r.gathered << ',' << format_value(ok ? r.rms : nan) << ',' << r.failure_mode << '\n';
  }
}

struct CompareRow {
  std::string scenario;
  ExpansionMode mode = ExpansionMode::kUShape;
  double length = 0.0;
  std::string status = "ok";  // ok, no solution, error
  double J_dist = 0.0;
  double J_total = 0.0;
};

/// Plans each scenario under the three separation treatments at each length.
inline std::vector<CompareRow> run_compare(const std::vector<Scenario>& scenarios, const std::vector<double>& lengths,
                                           int N, const OptimizerConfig& opt) {
  auto same_circles = [](const std::vector<Circle>& a, const std::vector<Circle>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].center.x != b[k].center.x || a[k].center.y != b[k].center.y || a[k].radius != b[k].radius) return false;
    }
    return true;
  };
  std::vector<CompareRow> rows;
  for (const Scenario& sc : scenarios) {
    // Without an expansion term the net length only enters through circle
    // merging, so equal circle sets give the same plan.
    std::vector<std::pair<std::vector<Circle>, CompareRow>> unconstrained;
    for (ExpansionMode mode : {ExpansionMode::kNone, ExpansionMode::kUShape, ExpansionMode::kHard}) {
      for (double len : lengths) {
        CompareRow row;
        row.scenario = sc.name;
        row.mode = mode;
        row.length = len;
        OptimizerConfig c = opt;
        c.expansion = mode;
        std::vector<Circle> circles;
        bool cacheable = false;
        if (mode == ExpansionMode::kNone) {
          try {
            circles = build_environment(sc, len).circles;
            cacheable = true;
          } catch (const Error&) {
          }
        }
        if (cacheable) {
          const auto hit = std::find_if(unconstrained.begin(), unconstrained.end(),
                                        [&](const auto& u) { return same_circles(u.first, circles); });
          if (hit != unconstrained.end()) {
            row.status = hit->second.status;
            row.J_dist = hit->second.J_dist;
            row.J_total = hit->second.J_total;
            rows.push_back(row);
            continue;
          }
        }
        try {
          const PlanResult pr = plan_scenario(sc, {N, len, c});
          row.J_dist = pr.cost.J_dist;
          row.J_total = pr.cost.total;
        } catch (const InfeasibleError&) {
          row.status = "no solution";
        } catch (const ValidationError&) {
          row.status = "no solution";
        } catch (const Error&) {
          row.status = "error";
        }
        if (cacheable) unconstrained.emplace_back(circles, row);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

inline void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "scenario,mode,length,status,J_dist,J_total\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const CompareRow& r : rows) {
    const bool ok = r.status == "ok";
    os << r.scenario << ',' << to_string(r.mode) << ',' << format_value(r.length) << ',' << r.status << ','
       << format_value(ok ? r.J_dist : nan) << ',' << format_value(ok ? r.J_total : nan) << '\n';
  }
}

// ---------------------------------------------------------------------------
// CSV tables and SVG rendering

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return static_cast<int>(k);
    }
    throw SchemaError("CSV has no column '" + name + "'");
  }
  double number(std::size_t row, int col) const { return std::strtod(rows[row][col].c_str(), nullptr); }
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(is, line)) throw SchemaError("CSV is empty");
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split(line));
    if (t.rows.back().size() != t.header.size()) throw SchemaError("CSV row has the wrong number of cells");
  }
  return t;
}

inline DuoTrajectory trajectory_from_csv(const CsvTable& t) {
  DuoTrajectory d;
  const int xl = t.column("xl"), yl = t.column("yl"), pl = t.column("phil");
  const int xr = t.column("xr"), yr = t.column("yr"), pr = t.column("phir");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    d.left.push_back({t.number(i, xl), t.number(i, yl), t.number(i, pl)});
    d.right.push_back({t.number(i, xr), t.number(i, yr), t.number(i, pr)});
  }
  validate(d);
  return d;
}

namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// World-to-canvas transform for map drawings (y up in the world).
struct MapFrame {
  double scale = 100.0;  // px per meter
  double width_m = 0.0;
  double height_m = 0.0;
  Vec2 origin;

  double x(double wx) const { return (wx - origin.x) * scale; }
  double y(double wy) const { return (height_m - (wy - origin.y)) * scale; }
};

inline MapFrame frame_for(const OccupancyGrid& g) {
  MapFrame f;
  f.width_m = g.width() * g.resolution();
  f.height_m = g.height() * g.resolution();
  f.origin = g.origin();
  return f;
}

inline void open(std::ostream& os, double w, double h) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline void grid_cells(std::ostream& os, const OccupancyGrid& g, const MapFrame& f) {
  const double res = g.resolution();
  for (int j = 0; j < g.height(); ++j) {
    int i = 0;
    while (i < g.width()) {
      const Cell c = g.at(i, j);
      if (c == Cell::kEmpty) {
        ++i;
        continue;
      }
      int k = i;
      while (k < g.width() && g.at(k, j) == c) ++k;
      const double x0 = g.origin().x + i * res, y1 = g.origin().y + (j + 1) * res;
      os << "<rect x=\"" << num(f.x(x0)) << "\" y=\"" << num(f.y(y1)) << "\" width=\"" << num((k - i) * res * f.scale)
         << "\" height=\"" << num(res * f.scale) << "\" fill=\"" << (c == Cell::kObstacle ? "#5d6d7e" : "#e74c3c")
         << "\"/>\n";
      i = k;
    }
  }
}

inline void polyline(std::ostream& os, const std::vector<Vec2>& pts, const MapFrame& f, const char* color,
                     bool dashed, double width = 2.0) {
  if (pts.empty()) return;
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << '"'
     << (dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
  for (std::size_t k = 0; k < pts.size(); ++k) os << (k ? " " : "") << num(f.x(pts[k].x)) << ',' << num(f.y(pts[k].y));
  os << "\"/>\n";
}

inline std::vector<Vec2> column_points(const CsvTable& t, const char* xc, const char* yc,
                                       const std::string& robot = "") {
  std::vector<Vec2> pts;
  const int x = t.column(xc), y = t.column(yc);
  const int r = robot.empty() ? -1 : t.column("robot");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (r >= 0 && t.rows[i][r] != robot) continue;
    pts.push_back({t.number(i, x), t.number(i, y)});
  }
  return pts;
}

}  // namespace svg

/// Map, circles, baseline (dashed) and optimized trajectory (solid).
inline void render_plan_svg(std::ostream& os, const OccupancyGrid& raw, const std::vector<Circle>& circles,
                            const CsvTable& baseline, const CsvTable& traj) {
  const svg::MapFrame f = svg::frame_for(raw);
  svg::open(os, f.width_m * f.scale, f.height_m * f.scale);
  svg::grid_cells(os, raw, f);
  for (const Circle& c : circles) {
    os << "<circle cx=\"" << svg::num(f.x(c.center.x)) << "\" cy=\"" << svg::num(f.y(c.center.y)) << "\" r=\""
       << svg::num(c.radius * f.scale) << "\" fill=\"none\" stroke=\"#999999\" stroke-dasharray=\"3 3\"/>\n";
  }
  svg::polyline(os, svg::column_points(baseline, "xl", "yl"), f, "#f1948a", true, 1.5);
  svg::polyline(os, svg::column_points(baseline, "xr", "yr"), f, "#85c1e9", true, 1.5);
  svg::polyline(os, svg::column_points(traj, "xl", "yl"), f, "#c0392b", false);
  svg::polyline(os, svg::column_points(traj, "xr", "yr"), f, "#2471a3", false);
  os << "</svg>\n";
}

/// Reference (dashed) against the tracked paths (solid) on the map.
inline void render_tracking_svg(std::ostream& os, const OccupancyGrid& raw, const CsvTable& reference,
                                const CsvTable& states) {
  const svg::MapFrame f = svg::frame_for(raw);
  svg::open(os, f.width_m * f.scale, f.height_m * f.scale);
  svg::grid_cells(os, raw, f);
  svg::polyline(os, svg::column_points(reference, "x", "y", "left"), f, "#c0392b", true, 1.5);
  svg::polyline(os, svg::column_points(reference, "x", "y", "right"), f, "#2471a3", true, 1.5);
  svg::polyline(os, svg::column_points(states, "x", "y", "left"), f, "#c0392b", false);
  svg::polyline(os, svg::column_points(states, "x", "y", "right"), f, "#2471a3", false);
  os << "</svg>\n";
}

/// Line chart of numeric columns against `x_col`; rows whose value is not a
/// finite number are skipped. One series per (group, column) pair when a
/// group column is given.
inline void render_chart_svg(std::ostream& os, const CsvTable& t, const std::string& x_col,
                             const std::vector<std::string>& y_cols, const std::string& group_col = "",
                             const std::string& title = "") {
  const double W = 640, H = 400, L = 70, R = 170, T = 40, B = 50;
  struct Series {
    std::string name;
    std::vector<Vec2> pts;
  };
  std::vector<Series> series;
  const int xc = t.column(x_col);
  const int gc = group_col.empty() ? -1 : t.column(group_col);
  for (const std::string& yname : y_cols) {
    const int yc = t.column(yname);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double x = t.number(i, xc), y = t.number(i, yc);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      const std::string name = (gc >= 0 ? t.rows[i][gc] + " " : "") + yname;
      auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.name == name; });
      if (it == series.end()) {
        series.push_back({name, {}});
        it = series.end() - 1;
      }
      it->pts.push_back({x, y});
    }
  }
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    for (const Vec2& p : s.pts) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
  if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  svg::open(os, W, H);
  if (!title.empty()) os << "<text x=\"" << svg::num(L) << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << svg::num(px(xv)) << "\" y=\"" << svg::num(H - B + 18) << "\" font-size=\"11\" "
       << "text-anchor=\"middle\">" << svg::num(xv) << "</text>\n";
    os << "<text x=\"" << svg::num(L - 6) << "\" y=\"" << svg::num(py(yv) + 4) << "\" font-size=\"11\" "
       << "text-anchor=\"end\">" << svg::num(yv) << "</text>\n";
  }
  os << "<text x=\"" << svg::num(0.5 * (L + W - R)) << "\" y=\"" << svg::num(H - 12)
     << "\" font-size=\"12\" text-anchor=\"middle\">" << x_col << "</text>\n";
  static const char* palette[] = {"#c0392b", "#2471a3", "#27ae60", "#8e44ad", "#d68910", "#17a589", "#566573"};
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 7];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < series[s].pts.size(); ++k) {
      os << (k ? " " : "") << svg::num(px(series[s].pts[k].x)) << ',' << svg::num(py(series[s].pts[k].y));
    }
    os << "\"/>\n";
    for (const Vec2& p : series[s].pts) {
      os << "<circle cx=\"" << svg::num(px(p.x)) << "\" cy=\"" << svg::num(py(p.y)) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    }
    const double ly = T + 16.0 * double(s);
    os << "<line x1=\"" << svg::num(W - R + 10) << "\" y1=\"" << svg::num(ly) << "\" x2=\"" << svg::num(W - R + 30)
       << "\" y2=\"" << svg::num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << svg::num(W - R + 34) << "\" y=\"" << svg::num(ly + 4) << "\" font-size=\"11\">"
       << series[s].name << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace tduo
