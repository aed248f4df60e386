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

// tduo: plan, simulate and study tethered robot duos.
//
// Exit codes: 0 success, 2 infeasible plan, 3 runtime failure (bad input,
// numeric failure, I/O).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tduo/harness.hpp"

namespace fs = std::filesystem;
using namespace tduo;

namespace {

constexpr int kExitInfeasible = 2;
constexpr int kExitFailure = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

CsvTable parse_csv_text(const std::string& text) {
  std::istringstream is(text);
  return read_csv(is);
}

template <typename Writer>
std::string to_text(Writer&& w) {
  std::ostringstream os;
  w(os);
  return os.str();
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::optional<double> parse_net_length(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "auto") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v > 0.0)) throw ValidationError("--net-length must be 'auto' or meters > 0");
  return v;
}

std::string length_dir(double len) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "len_%.3f", len);
  return buf;
}

// Chart renderers shared by the study commands and `render`.
std::string sweep_svg(const CsvTable& t) {
  return to_text([&](std::ostream& os) {
    render_chart_svg(os, t, "length", {"J_total", "J_dist", "J_total_exec", "J_dist_exec"}, "", "cost vs net length");
  });
}

std::vector<std::string> scenario_names(const CsvTable& t) {
  std::vector<std::string> names;
  const int c = t.column("scenario");
  for (const auto& row : t.rows) {
    if (std::find(names.begin(), names.end(), row[c]) == names.end()) names.push_back(row[c]);
  }
  return names;
}

std::string compare_svg(const CsvTable& t, const std::string& scenario) {
  CsvTable sub;
  sub.header = t.header;
  const int c = t.column("scenario");
  for (const auto& row : t.rows) {
    if (row[c] == scenario) sub.rows.push_back(row);
  }
  return to_text([&](std::ostream& os) {
    render_chart_svg(os, sub, "length", {"J_dist"}, "mode", "distance cost, " + scenario);
  });
}

struct Common {
  std::string scenario;
  std::string out = "out";
  unsigned seed = 0;  // recorded only; every command is deterministic
};

void add_common(CLI::App* c, Common& o, bool require_scenario = true) {
  c->add_option("--scenario", o.scenario, "scenario JSON file")->required(require_scenario);
  c->add_option("--out", o.out, "output directory")->capture_default_str();
  c->add_option("--seed", o.seed, "seed (recorded; runs are deterministic)")->capture_default_str();
}

// ---------------------------------------------------------------------------

struct PlanArgs {
  Common c;
  std::string net_length;
  int N = 100;
  int N_total = 8;
  std::string mode = "ushape";
};

int cmd_plan(const PlanArgs& a) {
  const Scenario sc = load_scenario(a.c.scenario);
  fs::create_directories(a.c.out);
  const fs::path out(a.c.out);
  PlanRequest req;
  req.N = a.N;
  req.optimizer.N_total = a.N_total;
  req.optimizer.expansion = parse_expansion_mode(a.mode);
  if (a.net_length != "auto") {
    const auto v = parse_net_length(a.net_length);
    req.net_length = v ? *v : CostParams::from_scenario(sc).d_max;
  }
  nlohmann::ordered_json info;
  info["scenario"] = sc.name;
  info["seed"] = a.c.seed;
  info["net_length_request"] = a.net_length.empty() ? "scenario" : a.net_length;
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult pr;
  try {
    pr = plan_scenario(sc, req);
  } catch (const InfeasibleError& e) {
    info["status"] = "infeasible";
    info["message"] = e.what();
    write_text(out / "plan.json", dump(info));
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string traj = to_text([&](std::ostream& os) { write_trajectory_csv(os, pr.duo); });
  const std::string base = to_text([&](std::ostream& os) { write_trajectory_csv(os, pr.baseline); });
  write_text(out / "traj.csv", traj);
  write_text(out / "baseline.csv", base);
  write_text(out / "iterations.csv", to_text([&](std::ostream& os) { write_iteration_log_csv(os, pr.log); }));
  write_text(out / "costs.csv", to_text([&](std::ostream& os) {
               write_cost_breakdown_csv(os, pr.duo, pr.env.inflated, pr.env.circles, pr.params);
             }));
  write_text(out / "plan.svg", to_text([&](std::ostream& os) {
               render_plan_svg(os, pr.env.raw, pr.env.circles, parse_csv_text(base), parse_csv_text(traj));
             }));
  info["status"] = "ok";
  info["mode"] = a.mode;
  info["d_max"] = pr.params.d_max;
  info["estimated"] = pr.estimated;
  info["J_total"] = pr.cost.total;
  info["J_dist"] = pr.cost.J_dist;
  info["J_e"] = pr.cost.J_e;
  info["violations"] = pr.report.count();
  info["wall_seconds"] = secs;
  write_text(out / "plan.json", dump(info));
  std::printf("%s: d_max %.4f m%s, J_total %.3f, J_dist %.3f, %.1f s\n", sc.name.c_str(), pr.params.d_max,
              pr.estimated ? " (estimated)" : "", pr.cost.total, pr.cost.J_dist, secs);
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common c;
  std::string traj;
  std::string controller = "mrac";
  std::string net_length;
};

/// Net length for a trajectory: explicit flag, else plan.json next to it,
/// else the scenario's.
double simulate_net_length(const SimulateArgs& a, const Scenario& sc) {
  if (!a.net_length.empty()) {
    const auto v = parse_net_length(a.net_length);
    if (!v) throw ValidationError("simulate needs a numeric --net-length");
    return *v;
  }
  const fs::path info = fs::path(a.traj).parent_path() / "plan.json";
  if (fs::exists(info)) {
    const auto j = nlohmann::json::parse(read_text(info), nullptr, false);
    if (j.is_object() && j.contains("d_max") && j["d_max"].is_number()) return j["d_max"].get<double>();
  }
  return CostParams::from_scenario(sc).d_max;
}

void check_consistent(const Scenario& sc, const DuoTrajectory& d) {
  auto same = [](const Pose& a, const Pose& b) {
    return distance(a.position(), b.position()) < 1e-6 && std::abs(wrap_angle(a.phi - b.phi)) < 1e-6;
  };
  if (!same(d.left.front(), sc.start.left) || !same(d.right.front(), sc.start.right) ||
      !same(d.left.back(), sc.end.left) || !same(d.right.back(), sc.end.right)) {
    throw ValidationError("trajectory endpoints do not match the scenario start/end poses");
  }
}

int cmd_simulate(const SimulateArgs& a) {
  const Scenario sc = load_scenario(a.c.scenario);
  const DuoTrajectory plan = trajectory_from_csv(parse_csv_text(read_text(a.traj)));
  check_consistent(sc, plan);
  const double len = simulate_net_length(a, sc);
  fs::create_directories(a.c.out);
  const fs::path out(a.c.out);
  SimConfig cfg = SimConfig::from_scenario(sc);
  cfg.controller = parse_controller(a.controller);
  const auto t0 = std::chrono::steady_clock::now();
  const SimResult r = simulate(sc, plan, len, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Environment env = build_environment(sc);
  const CostParams p = CostParams::from_scenario(sc).with_net_length(len);
  RunReport rep = make_report(sc, env, plan, p, r, cfg.controller);
  rep.wall_seconds = secs;

  const TimedReference ref = build_reference(plan, cfg.v_ref, 1.0 / cfg.control_rate, cfg.hold);
  const std::string ref_csv = to_text([&](std::ostream& os) { write_reference_csv(os, ref); });
  const std::string states = to_text([&](std::ostream& os) { write_state_log_csv(os, r); });
  write_text(out / "reference.csv", ref_csv);
  write_text(out / "states.csv", states);
  write_text(out / "controller.csv", to_text([&](std::ostream& os) { write_control_log_csv(os, r); }));
  write_text(out / "executed.csv", to_text([&](std::ostream& os) { write_trajectory_csv(os, r.executed); }));
  write_text(out / "tracking.svg", to_text([&](std::ostream& os) {
               render_tracking_svg(os, sc.grid, parse_csv_text(ref_csv), parse_csv_text(states));
             }));
  auto j = to_json(rep);
  j["seed"] = a.c.seed;
  write_text(out / "report.json", dump(j));
  std::printf("%s/%s: gathered %d/%d, rms %.4f/%.4f m, %s\n", sc.name.c_str(), a.controller.c_str(),
              rep.objects_gathered, rep.objects_total, rep.rms_left, rep.rms_right,
              rep.failed ? ("FAILED (" + rep.failure_mode + ")").c_str() : "ok");
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  Common c;
  std::vector<double> lengths{1.5, 2.0, 2.32, 2.5, 3.0};
  int N = 100;
  int N_total = 8;
  std::string controller = "mrac";
};

int cmd_sweep(const SweepArgs& a) {
  const Scenario sc = load_scenario(a.c.scenario);
  fs::create_directories(a.c.out);
  const fs::path out(a.c.out);
  OptimizerConfig opt;
  opt.N_total = a.N_total;
  SimConfig sim = SimConfig::from_scenario(sc);
  sim.controller = parse_controller(a.controller);
  const auto rows = run_sweep(sc, a.lengths, a.N, opt, sim);
  for (const SweepRow& r : rows) {
    const fs::path dir = out / "runs" / length_dir(r.length);
    fs::create_directories(dir);
    if (r.status == "ok") {
      write_text(dir / "traj.csv", to_text([&](std::ostream& os) { write_trajectory_csv(os, r.plan); }));
    } else {
      write_text(dir / "failure.txt", r.status + ": " + r.message + "\n");
    }
  }
  const std::string csv = to_text([&](std::ostream& os) { write_sweep_csv(os, rows); });
  write_text(out / "sweep.csv", csv);
  write_text(out / "sweep.svg", sweep_svg(parse_csv_text(csv)));
  std::cout << csv;
  return 0;
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  Common c;
  std::vector<std::string> scenarios;
  std::vector<double> lengths{0.9, 1.2, 1.5};
  int N = 100;
  int N_total = 8;
};

int cmd_compare(const CompareArgs& a) {
  std::vector<Scenario> scs;
  if (!a.c.scenario.empty()) scs.push_back(load_scenario(a.c.scenario));
  for (const std::string& s : a.scenarios) scs.push_back(load_scenario(s));
  if (scs.empty()) throw ValidationError("compare-costs needs --scenario");
  fs::create_directories(a.c.out);
  const fs::path out(a.c.out);
  OptimizerConfig opt;
  opt.N_total = a.N_total;
  const auto rows = run_compare(scs, a.lengths, a.N, opt);
  const std::string csv = to_text([&](std::ostream& os) { write_compare_csv(os, rows); });
  write_text(out / "compare.csv", csv);
  const CsvTable t = parse_csv_text(csv);
  for (const std::string& name : scenario_names(t)) write_text(out / ("compare_" + name + ".svg"), compare_svg(t, name));
  std::cout << csv;
  return 0;
}

// ---------------------------------------------------------------------------

/// Re-renders every SVG in an output directory from the CSVs next to it.
int cmd_render(const Common& c) {
  const fs::path out(c.out);
  int n = 0;
  if (fs::exists(out / "traj.csv") && fs::exists(out / "baseline.csv")) {
    if (c.scenario.empty()) throw ValidationError("rendering plan.svg needs --scenario");
    const Scenario sc = load_scenario(c.scenario);
    const Environment env = build_environment(sc);
    write_text(out / "plan.svg", to_text([&](std::ostream& os) {
                 render_plan_svg(os, env.raw, env.circles, parse_csv_text(read_text(out / "baseline.csv")),
                                 parse_csv_text(read_text(out / "traj.csv")));
               }));
    ++n;
  }
  if (fs::exists(out / "reference.csv") && fs::exists(out / "states.csv")) {
    if (c.scenario.empty()) throw ValidationError("rendering tracking.svg needs --scenario");
    const Scenario sc = load_scenario(c.scenario);
    write_text(out / "tracking.svg", to_text([&](std::ostream& os) {
                 render_tracking_svg(os, sc.grid, parse_csv_text(read_text(out / "reference.csv")),
                                     parse_csv_text(read_text(out / "states.csv")));
               }));
    ++n;
  }
  if (fs::exists(out / "sweep.csv")) {
    write_text(out / "sweep.svg", sweep_svg(parse_csv_text(read_text(out / "sweep.csv"))));
    ++n;
  }
  if (fs::exists(out / "compare.csv")) {
    const CsvTable t = parse_csv_text(read_text(out / "compare.csv"));
    for (const std::string& name : scenario_names(t)) {
      write_text(out / ("compare_" + name + ".svg"), compare_svg(t, name));
      ++n;
    }
  }
  std::printf("rendered %d file(s)\n", n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plan and simulate tethered robot duos."};
  app.require_subcommand(1);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "plan a duo trajectory");
  add_common(p, plan.c);
  p->add_option("--net-length", plan.net_length, "'auto' or meters (default: the scenario's d_max)");
  p->add_option("--N", plan.N, "waypoints per robot")->capture_default_str();
  p->add_option("--N-total", plan.N_total, "alternation steps")->capture_default_str();
  p->add_option("--mode", plan.mode, "separation treatment: ushape, none, hard")->capture_default_str();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "track a planned trajectory in closed loop");
  add_common(s, sim.c);
  s->add_option("--traj", sim.traj, "trajectory CSV (idx,xl,yl,phil,xr,yr,phir)")->required();
  s->add_option("--controller", sim.controller, "mrac or model-based")->capture_default_str();
  s->add_option("--net-length", sim.net_length, "meters (default: plan.json next to --traj, else scenario)");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "plan and simulate over net lengths");
  add_common(w, sw.c);
  w->add_option("--lengths", sw.lengths, "net lengths in meters")->delimiter(',')->capture_default_str();
  w->add_option("--N", sw.N, "waypoints per robot")->capture_default_str();
  w->add_option("--N-total", sw.N_total, "alternation steps")->capture_default_str();
  w->add_option("--controller", sw.controller, "mrac or model-based")->capture_default_str();

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare-costs", "compare separation treatments");
  add_common(c, cmp.c, false);
  c->add_option("--also", cmp.scenarios, "further scenario files");
  c->add_option("--lengths", cmp.lengths, "net lengths in meters")->delimiter(',')->capture_default_str();
  c->add_option("--N", cmp.N, "waypoints per robot")->capture_default_str();
  c->add_option("--N-total", cmp.N_total, "alternation steps")->capture_default_str();

  Common rend;
  auto* r = app.add_subcommand("render", "re-render SVGs from the CSVs in --out");
  add_common(r, rend, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (p->parsed()) return cmd_plan(plan);
    if (s->parsed()) return cmd_simulate(sim);
    if (w->parsed()) return cmd_sweep(sw);
    if (c->parsed()) return cmd_compare(cmp);
    if (r->parsed()) return cmd_render(rend);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
