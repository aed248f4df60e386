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

// Bound-constrained quasi-Newton minimization wrapped in an augmented
// Lagrangian loop for inequality constraints g(x) <= 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tduo/common.hpp"

namespace tduo::nlp {

using Vector = Eigen::VectorXd;

/// One nonzero of a constraint Jacobian.
struct JacEntry {
  int row;
  int col;
  double value;
};

/// Objective: returns f(x) and fills grad when non-null.
using Objective = std::function<double(const Vector& x, Vector* grad)>;
/// Constraints: fills g (size num_constraints) and, when non-null, the
/// Jacobian nonzeros.
using Constraints = std::function<void(const Vector& x, Vector& g, std::vector<JacEntry>* jac)>;

struct Problem {
  Vector x0;
  Vector lower;
  Vector upper;
  Objective objective;
  int num_constraints = 0;
  Constraints constraints;
};

struct Options {
  double grad_tol = 1e-6;        // on the projected gradient, scaled by max(1, |f|)
  double constraint_tol = 1e-8;  // max(0, g) at acceptance
  int max_inner = 500;
  int max_outer = 30;
  double rho0 = 1e3;
  double rho_growth = 10.0;
  double rho_max = 1e10;
  int memory = 8;
};

struct Result {
  Vector x;
  double f = 0.0;
  double violation = 0.0;
  int inner_iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
};

namespace detail {

inline Vector clamp(const Vector& x, const Vector& lo, const Vector& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

inline void check_finite(double f, const Vector& g, const char* what) {
  if (std::isnan(f)) throw NumericError(std::string(what) + " returned NaN");
  if (!g.allFinite() && std::isfinite(f)) throw NumericError(std::string(what) + " gradient is not finite");
}

struct BoundedResult {
  Vector x;
  double f;
  int iterations;
  bool converged;
};

/// Projected L-BFGS with backtracking on the projection arc. The objective
/// may return +inf to reject a trial point.
inline BoundedResult minimize_bounded(const Objective& fn, const Vector& x0, const Vector& lo,
                                      const Vector& hi, const Options& opt, const char* what) {
  const Eigen::Index n = x0.size();
  Vector x = clamp(x0, lo, hi);
  Vector g(n);
  double f = fn(x, &g);
  check_finite(f, g, what);
  if (!std::isfinite(f)) throw NumericError(std::string(what) + " is not finite at the initial point");

  std::deque<Vector> S, Y;
  std::deque<double> R;
  int it = 0;
  bool converged = false;
  for (; it < opt.max_inner; ++it) {
    const Vector pg = clamp(x - g, lo, hi) - x;
    if (pg.lpNorm<Eigen::Infinity>() <= opt.grad_tol * std::max(1.0, std::abs(f))) {
      converged = true;
      break;
    }
    // Variables held at a bound by the gradient are frozen for this step.
    Eigen::Array<bool, Eigen::Dynamic, 1> active(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      active(k) = (x(k) <= lo(k) && g(k) > 0.0) || (x(k) >= hi(k) && g(k) < 0.0);
    }
    auto mask = [&](Vector v) {
      for (Eigen::Index k = 0; k < n; ++k)
        if (active(k)) v(k) = 0.0;
      return v;
    };
    Vector q = mask(g);
    const int m = static_cast<int>(S.size());
    std::vector<double> alpha(m);
    for (int k = m - 1; k >= 0; --k) {
      alpha[k] = R[k] * S[k].dot(q);
      q -= alpha[k] * Y[k];
    }
    if (m > 0) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (int k = 0; k < m; ++k) {
      const double beta = R[k] * Y[k].dot(q);
      q += (alpha[k] - beta) * S[k];
    }
    Vector d = -mask(q);
    double slope = g.dot(d);
    bool steepest = m == 0;
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      R.clear();
      d = -mask(g);
      slope = g.dot(d);
      steepest = true;
    }
    double step = steepest ? std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), 1e-300)) : 1.0;
    Vector xn, gn(n);
    double fn_val = std::numeric_limits<double>::infinity();
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = clamp(x + step * d, lo, hi);
      fn_val = fn(xn, &gn);
      check_finite(fn_val, gn, what);
      if (std::isfinite(fn_val) && fn_val <= f + 1e-4 * g.dot(xn - x)) {
        ok = true;
        break;
      }
      step *= std::isfinite(fn_val) ? 0.5 : 0.1;
    }
    if (!ok) {
      if (steepest) break;  // no descent possible along the projected gradient
      S.clear();
      Y.clear();
      R.clear();
      continue;
    }
    const Vector s = xn - x;
    const Vector y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      R.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opt.memory) {
        S.pop_front();
        Y.pop_front();
        R.pop_front();
      }
    }
    const bool stalled = std::abs(f - fn_val) <= 1e-15 * std::max(1.0, std::abs(f));
    x = xn;
    g = gn;
    f = fn_val;
    if (stalled && s.lpNorm<Eigen::Infinity>() < 1e-14) break;
  }
  return {x, f, it, converged};
}

}  // namespace detail

/// Minimizes f on [lower, upper] without constraints.
inline Result minimize(const Objective& f, const Vector& x0, const Vector& lower, const Vector& upper,
                       const Options& opt = {}) {
  Vector g0(x0.size());
  const Vector xs = detail::clamp(x0, lower, upper);
  const double f0 = f(xs, &g0);
  auto r = detail::minimize_bounded(f, xs, lower, upper, opt, "objective");
  Result out;
  out.inner_iterations = r.iterations;
  out.outer_iterations = 1;
  out.converged = r.converged;
  if (r.f <= f0) {
    out.x = r.x;
    out.f = r.f;
  } else {
    out.x = xs;
    out.f = f0;
  }
  return out;
}

/// Constraint violation max(0, max_k g_k(x)).
inline double violation(const Problem& p, const Vector& x) {
  if (p.num_constraints == 0) return 0.0;
  Vector g(p.num_constraints);
  p.constraints(x, g, nullptr);
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (std::isnan(g(k))) throw NumericError("constraint " + std::to_string(k) + " returned NaN");
  }
  return std::max(0.0, g.maxCoeff());
}

/// Augmented Lagrangian over inequality constraints. Returns the best point
/// seen, ordered by (violation above tolerance, objective).
inline Result solve(const Problem& p, const Options& opt = {}) {
  if (p.num_constraints == 0) return minimize(p.objective, p.x0, p.lower, p.upper, opt);
  const int m = p.num_constraints;
  Vector lambda = Vector::Zero(m);
  double rho = opt.rho0;

  std::vector<JacEntry> jac;
  Vector gval(m);
  const Objective merit = [&](const Vector& x, Vector* grad) {
    double f = p.objective(x, grad);
    if (std::isnan(f)) throw NumericError("objective returned NaN");
    if (!std::isfinite(f)) return f;
    jac.clear();
    p.constraints(x, gval, grad ? &jac : nullptr);
    std::vector<double> w(m, 0.0);
    for (int k = 0; k < m; ++k) {
      if (std::isnan(gval(k))) throw NumericError("constraint " + std::to_string(k) + " returned NaN");
      const double t = lambda(k) + rho * gval(k);
      if (t > 0.0) {
        f += (t * t - lambda(k) * lambda(k)) / (2.0 * rho);
        w[k] = t;
      } else {
        f -= lambda(k) * lambda(k) / (2.0 * rho);
      }
    }
    if (grad) {
      for (const JacEntry& e : jac) (*grad)(e.col) += w[e.row] * e.value;
    }
    return f;
  };

  auto better = [&](double va, double fa, double vb, double fb) {
    const bool oka = va <= opt.constraint_tol, okb = vb <= opt.constraint_tol;
    if (oka != okb) return oka;
    if (!oka && va != vb) return va < vb;
    return fa < fb;
  };

  Result best;
  best.x = detail::clamp(p.x0, p.lower, p.upper);
  best.f = p.objective(best.x, nullptr);
  if (std::isnan(best.f)) throw NumericError("objective returned NaN");
  if (!std::isfinite(best.f)) throw NumericError("objective is not finite at the initial point");
  best.violation = violation(p, best.x);

  Vector x = best.x;
  double prev_viol = std::numeric_limits<double>::infinity();
  int total_inner = 0;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const auto r = detail::minimize_bounded(merit, x, p.lower, p.upper, opt, "objective");
    total_inner += r.iterations;
    x = r.x;
    const double f = p.objective(x, nullptr);
    p.constraints(x, gval, nullptr);
    const double viol = std::max(0.0, gval.maxCoeff());
    if (better(viol, f, best.violation, best.f)) {
      best.x = x;
      best.f = f;
      best.violation = viol;
    }
    best.outer_iterations = outer + 1;
    if (viol <= opt.constraint_tol && r.converged) {
      best.converged = true;
      break;
    }
    for (int k = 0; k < m; ++k) lambda(k) = std::max(0.0, lambda(k) + rho * gval(k));
    if (viol > 0.25 * prev_viol) rho = std::min(rho * opt.rho_growth, opt.rho_max);
    prev_viol = viol;
  }
  best.inner_iterations = total_inner;
  return best;
}

}  // namespace tduo::nlp
