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
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tduo/common.hpp"
#include "tduo/geometry.hpp"
#include "tduo/grid.hpp"

namespace tduo {

struct Object {
  Vec2 position;
  double mass_kg = 0.0;
};

/// Inflated bounding circle around a cluster of objects.
struct Circle {
  Vec2 center;
  double radius = 0.0;
  std::vector<int> members;  // indices into Scenario::objects
  std::vector<double> member_masses;

  bool contains(Vec2 p) const { return distance(p, center) < radius; }
};

struct DuoPose {
  Pose left;
  Pose right;

  Pose midpoint() const {
    // Mean heading through the unit-vector average so +-pi pairs behave.
    const double phi = std::atan2(std::sin(left.phi) + std::sin(right.phi),
                                  std::cos(left.phi) + std::cos(right.phi));
    return {0.5 * (left.x + right.x), 0.5 * (left.y + right.y), phi};
  }
};

struct Scenario {
  std::string name;
  OccupancyGrid grid;  // raw map, objects labelled
  std::vector<Object> objects;
  DuoPose start;
  DuoPose end;
  double safety_margin = 0.0;
  std::map<std::string, double> params;  // planner/controller overrides

  double param(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

// ---------------------------------------------------------------------------
// Obstacle inflation

namespace detail {

inline std::vector<bool> obstacle_mask(const OccupancyGrid& g) {
  std::vector<bool> m(g.cells().size());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = g.cells()[k] == Cell::kObstacle;
  return m;
}

inline void mark_inflated(OccupancyGrid& out, const OccupancyGrid& in, int i, int j) {
  const Cell c = in.at(i, j);
  if (c == Cell::kObject) {
    std::ostringstream os;
    os << "safety margin swallows object cell (" << i << ", " << j
       << "): objects must not be this close to obstacles (assumption i)";
    throw ValidationError(os.str());
  }
  out.set(i, j, Cell::kObstacle);
}

}  // namespace detail

inline constexpr int kBruteForceInflationLimit = 200;

/// Marks every cell whose center lies within `margin` meters of an obstacle
/// cell center. Grids up to 200x200 use a windowed exact scan; larger grids use
/// the exact separable distance transform.
inline OccupancyGrid inflate_obstacles(const OccupancyGrid& grid, double margin) {
  if (!(margin >= 0.0)) throw ValidationError("safety margin must be >= 0");
  OccupancyGrid out = grid;
  if (margin == 0.0) return out;
  const double res = grid.resolution();
  const double r_cells = margin / res;
  const double r2 = r_cells * r_cells * (1.0 + 1e-12);
  if (grid.width() <= kBruteForceInflationLimit && grid.height() <= kBruteForceInflationLimit) {
    const int w = static_cast<int>(std::floor(r_cells));
    for (int j = 0; j < grid.height(); ++j) {
      for (int i = 0; i < grid.width(); ++i) {
        if (grid.at(i, j) != Cell::kObstacle) continue;
        for (int dj = -w; dj <= w; ++dj) {
          for (int di = -w; di <= w; ++di) {
            if (double(di * di + dj * dj) > r2) continue;
            const CellIndex c{i + di, j + dj};
            if (!grid.contains(c) || grid.at(c) == Cell::kObstacle) continue;
            detail::mark_inflated(out, grid, c.i, c.j);
          }
        }
      }
    }
    return out;
  }
  const auto d2 = squared_distance_transform(detail::obstacle_mask(grid), grid.width(),
                                             grid.height());
  for (int j = 0; j < grid.height(); ++j) {
    for (int i = 0; i < grid.width(); ++i) {
      const std::size_t k = grid.index({i, j});
      if (grid.at(i, j) != Cell::kObstacle && d2[k] <= r2) detail::mark_inflated(out, grid, i, j);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bounding circles

namespace detail {

inline Circle circle_around(const std::vector<int>& members, const std::vector<Vec2>& points,
                            const std::vector<double>& masses, double margin) {
  std::vector<Vec2> pts;
  pts.reserve(members.size());
  for (int m : members) pts.push_back(points[m]);
  const Disc d = min_enclosing_circle(pts);
  Circle c;
  c.center = d.center;
  c.radius = d.radius + margin;
  c.members = members;
  std::sort(c.members.begin(), c.members.end());
  for (int m : c.members) c.member_masses.push_back(masses[m]);
  return c;
}

}  // namespace detail

/// Repeatedly merges overlapping circles (center distance < r_i + r_j) into
/// the enclosing circle of their member points plus `margin`, until no pair
/// overlaps. Output is sorted by (x, y) of the centers.
inline std::vector<Circle> merge_circles(std::vector<Circle> circles, const std::vector<Vec2>& points,
                                         const std::vector<double>& masses, double margin) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t a = 0; a < circles.size() && !merged; ++a) {
      for (std::size_t b = a + 1; b < circles.size() && !merged; ++b) {
        if (distance(circles[a].center, circles[b].center) <
            circles[a].radius + circles[b].radius) {
          std::vector<int> members = circles[a].members;
          members.insert(members.end(), circles[b].members.begin(), circles[b].members.end());
          circles[a] = detail::circle_around(members, points, masses, margin);
          circles.erase(circles.begin() + static_cast<std::ptrdiff_t>(b));
          merged = true;
        }
      }
    }
  }
  std::sort(circles.begin(), circles.end(), [](const Circle& l, const Circle& r) {
    return l.center.x != r.center.x ? l.center.x < r.center.x : l.center.y < r.center.y;
  });
  return circles;
}

/// Smallest distance from `p` to any point of the cell box.
inline double distance_to_cell(const OccupancyGrid& g, CellIndex c, Vec2 p) {
  const Vec2 lo{g.origin().x + c.i * g.resolution(), g.origin().y + c.j * g.resolution()};
  const Vec2 hi{lo.x + g.resolution(), lo.y + g.resolution()};
  const double dx = std::max({lo.x - p.x, 0.0, p.x - hi.x});
  const double dy = std::max({lo.y - p.y, 0.0, p.y - hi.y});
  return std::hypot(dx, dy);
}

/// Clusters objects (8-connected object cells), fits inflated enclosing
/// circles and merges overlapping ones. `inflated` is the obstacle-inflated
/// grid used for the no-overlap check; `max_radius` enforces radius < d_max.
inline std::vector<Circle> bounding_circles(const Scenario& sc, const OccupancyGrid& inflated,
                                            std::optional<double> max_radius = std::nullopt) {
  const OccupancyGrid& g = sc.grid;
  const double margin = sc.safety_margin;
  // Points: listed objects first, then object cells with no listed object.
  std::vector<Vec2> points;
  std::vector<double> masses;
  std::vector<int> owner(g.cells().size(), -1);
  std::vector<bool> has_object(g.cells().size(), false);
  for (const Object& o : sc.objects) {
    points.push_back(o.position);
    masses.push_back(o.mass_kg);
    has_object[g.index(g.world_to_cell(o.position))] = true;
  }
  for (int j = 0; j < g.height(); ++j) {
    for (int i = 0; i < g.width(); ++i) {
      if (g.at(i, j) == Cell::kObject && !has_object[g.index({i, j})]) {
        points.push_back(g.cell_center({i, j}));
        masses.push_back(0.0);
      }
    }
  }
  // Connected components of object cells.
  std::vector<int> comp(g.cells().size(), -1);
  int ncomp = 0;
  std::vector<CellIndex> stack;
  for (int j = 0; j < g.height(); ++j) {
    for (int i = 0; i < g.width(); ++i) {
      if (g.at(i, j) != Cell::kObject || comp[g.index({i, j})] >= 0) continue;
      stack.push_back({i, j});
      comp[g.index({i, j})] = ncomp;
      while (!stack.empty()) {
        const CellIndex c = stack.back();
        stack.pop_back();
        for (int dj = -1; dj <= 1; ++dj) {
          for (int di = -1; di <= 1; ++di) {
            const CellIndex n{c.i + di, c.j + dj};
            if (!g.contains(n) || g.at(n) != Cell::kObject || comp[g.index(n)] >= 0) continue;
            comp[g.index(n)] = ncomp;
            stack.push_back(n);
          }
        }
      }
      ++ncomp;
    }
  }
  std::vector<std::vector<int>> groups(ncomp);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const CellIndex c = g.world_to_cell(points[p]);
    const int k = comp[g.index(c)];
    if (k < 0) throw ValidationError("object point is not on an object cell");
    groups[k].push_back(static_cast<int>(p));
  }
  std::vector<Circle> circles;
  for (const auto& grp : groups) {
    if (grp.empty()) continue;
    circles.push_back(detail::circle_around(grp, points, masses, margin));
  }
  circles = merge_circles(std::move(circles), points, masses, margin);
  for (std::size_t k = 0; k < circles.size(); ++k) {
    const Circle& c = circles[k];
    if (!(c.radius > 0.0)) {
      throw ValidationError("bounding circle has zero radius; use a positive safety margin");
    }
    if (max_radius && c.radius >= *max_radius) {
      std::ostringstream os;
      os << "circle " << k << " radius " << c.radius << " m is not below the net length "
         << *max_radius << " m (assumption ii)";
      throw ValidationError(os.str());
    }
    // Assumption (i): circle must not touch inflated obstacle cells.
    const CellIndex lo = inflated.world_to_cell(c.center - Vec2{c.radius, c.radius});
    const CellIndex hi = inflated.world_to_cell(c.center + Vec2{c.radius, c.radius});
    for (int j = std::max(lo.j, 0); j <= std::min(hi.j, inflated.height() - 1); ++j) {
      for (int i = std::max(lo.i, 0); i <= std::min(hi.i, inflated.width() - 1); ++i) {
        if (inflated.at(i, j) == Cell::kObstacle &&
            distance_to_cell(inflated, {i, j}, c.center) < c.radius) {
          std::ostringstream os;
          os << "circle " << k << " at (" << c.center.x << ", " << c.center.y
             << ") overlaps an inflated obstacle (assumption i)";
          throw ValidationError(os.str());
        }
      }
    }
  }
  return circles;
}

// ---------------------------------------------------------------------------
// Scenario file I/O

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

template <typename T>
T field(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError("missing field '" + where + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError("field '" + where + key + "' has the wrong type");
  }
}

inline Pose pose_field(const nlohmann::json& j, const std::string& key, const std::string& where) {
  const auto v = field<std::vector<double>>(j, key, where);
  if (v.size() != 3) throw SchemaError("field '" + where + key + "' must be [x, y, phi]");
  return {v[0], v[1], v[2]};
}

inline void require_free(const OccupancyGrid& inflated, const Pose& p, const std::string& what) {
  const Cell c = inflated.label_at(p.position());
  if (c != Cell::kEmpty) {
    std::ostringstream os;
    os << what << " pose (" << p.x << ", " << p.y << ") is not in free, non-inflated space";
    throw ValidationError(os.str());
  }
}

}  // namespace detail

/// Builds a scenario from its JSON document and checks every invariant.
inline Scenario parse_scenario(const nlohmann::json& doc, std::string name = "scenario") {
  using detail::field;
  Scenario sc;
  sc.name = doc.contains("name") && doc["name"].is_string() ? doc["name"].get<std::string>()
                                                              : std::move(name);
  const auto& jg = doc.contains("grid") ? doc["grid"] : nlohmann::json();
  if (jg.is_null()) throw SchemaError("missing field 'grid'");
  const int w = field<int>(jg, "width", "grid.");
  const int h = field<int>(jg, "height", "grid.");
  const double res = field<double>(jg, "resolution_m", "grid.");
  const auto origin = field<std::vector<double>>(jg, "origin", "grid.");
  if (origin.size() != 2) throw SchemaError("field 'grid.origin' must be [x, y]");
  const auto rows = field<std::vector<std::string>>(jg, "rows", "grid.");
  if (static_cast<int>(rows.size()) != h) {
    throw SchemaError("grid.rows has " + std::to_string(rows.size()) + " rows, expected " +
                      std::to_string(h));
  }
  sc.grid = OccupancyGrid(w, h, res, {origin[0], origin[1]});
  // rows[0] is the top of the map (largest y).
  for (int r = 0; r < h; ++r) {
    const std::string& row = rows[r];
    if (static_cast<int>(row.size()) != w) {
      throw SchemaError("grid.rows[" + std::to_string(r) + "] has " + std::to_string(row.size()) +
                        " cells, expected " + std::to_string(w));
    }
    const int j = h - 1 - r;
    for (int i = 0; i < w; ++i) {
      switch (row[i]) {
        case '.': sc.grid.set(i, j, Cell::kEmpty); break;
        case '#': sc.grid.set(i, j, Cell::kObstacle); break;
        case 'o': sc.grid.set(i, j, Cell::kObject); break;
        default:
          throw SchemaError("grid.rows[" + std::to_string(r) + "][" + std::to_string(i) +
                            "]: unknown cell character '" + std::string(1, row[i]) + "'");
      }
    }
  }
  if (!doc.contains("objects") || !doc["objects"].is_array()) {
    throw SchemaError("missing field 'objects'");
  }
  for (std::size_t k = 0; k < doc["objects"].size(); ++k) {
    const auto& jo = doc["objects"][k];
    const std::string where = "objects[" + std::to_string(k) + "].";
    Object o{{field<double>(jo, "x_m", where), field<double>(jo, "y_m", where)},
             field<double>(jo, "mass_kg", where)};
    if (!(o.mass_kg >= 0.0)) throw ValidationError(where + "mass_kg must be >= 0");
    const CellIndex c = sc.grid.world_to_cell(o.position);
    if (!sc.grid.contains(c)) throw ValidationError("object " + std::to_string(k) + " lies outside the grid");
    if (sc.grid.at(c) == Cell::kObstacle) {
      throw ValidationError("object " + std::to_string(k) +
                            " is inside an obstacle footprint (assumption i)");
    }
    sc.grid.set(c, Cell::kObject);
    sc.objects.push_back(o);
  }
  for (const char* which : {"start", "end"}) {
    if (!doc.contains(which)) throw SchemaError(std::string("missing field '") + which + "'");
    DuoPose& dp = std::string(which) == "start" ? sc.start : sc.end;
    const std::string where = std::string(which) + ".";
    dp.left = detail::pose_field(doc[which], "left", where);
    dp.right = detail::pose_field(doc[which], "right", where);
  }
  sc.safety_margin = field<double>(doc, "safety_margin_m", "");
  if (!(sc.safety_margin >= 0.0)) throw ValidationError("safety_margin_m must be >= 0");
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) throw SchemaError("field 'params' must be an object");
    for (const auto& [k, v] : doc["params"].items()) {
      if (!v.is_number()) throw SchemaError("params." + k + " must be a number");
      sc.params[k] = v.get<double>();
    }
  }
  const OccupancyGrid inflated = inflate_obstacles(sc.grid, sc.safety_margin);
  detail::require_free(inflated, sc.start.left, "start.left");
  detail::require_free(inflated, sc.start.right, "start.right");
  detail::require_free(inflated, sc.end.left, "end.left");
  detail::require_free(inflated, sc.end.right, "end.right");
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ":" + std::to_string(detail::line_of_offset(text, e.byte)) +
                      ": " + e.what());
  }
  return parse_scenario(doc, path.stem().string());
}

// ---------------------------------------------------------------------------

/// Everything the planner and checkers need about the world, derived once.
struct Environment {
  OccupancyGrid raw;
  OccupancyGrid inflated;
  std::vector<Circle> circles;
  DistanceField clearance;           // signed distance to inflated obstacles and objects
  std::vector<CellIndex> boundary;   // inflated obstacle cells with a free 4-neighbour
};

inline std::vector<CellIndex> obstacle_boundary(const OccupancyGrid& g) {
  std::vector<CellIndex> out;
  for (int j = 0; j < g.height(); ++j) {
    for (int i = 0; i < g.width(); ++i) {
      if (g.at(i, j) != Cell::kObstacle) continue;
      bool edge = false;
      for (const CellIndex n : {CellIndex{i + 1, j}, CellIndex{i - 1, j}, CellIndex{i, j + 1},
                                CellIndex{i, j - 1}}) {
        if (g.contains(n) && g.at(n) != Cell::kObstacle) edge = true;
      }
      if (edge) out.push_back({i, j});
    }
  }
  return out;
}

inline Environment build_environment(const Scenario& sc, std::optional<double> max_radius = std::nullopt) {
  Environment env;
  env.raw = sc.grid;
  env.inflated = inflate_obstacles(sc.grid, sc.safety_margin);
  env.circles = bounding_circles(sc, env.inflated, max_radius);
  env.clearance = DistanceField(env.inflated, true);
  env.boundary = obstacle_boundary(env.inflated);
  return env;
}

}  // namespace tduo
