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
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tduo/common.hpp"

namespace tduo {

enum class Cell : std::uint8_t { kEmpty = 0, kObstacle = 1, kObject = 2 };

struct CellIndex {
  int i = 0;  // column (x)
  int j = 0;  // row (y)
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Row-major occupancy grid. Cell (0, 0) has its lower-left corner at
/// `origin`; cell (i, j) covers [origin + i*res, origin + (i+1)*res) in x and
/// likewise in y.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;

  OccupancyGrid(int width, int height, double resolution, Vec2 origin = {})
      : width_(width),
        height_(height),
        resolution_(resolution),
        origin_(origin),
        cells_(static_cast<std::size_t>(std::max(width, 0)) *
                   static_cast<std::size_t>(std::max(height, 0)),
               Cell::kEmpty) {
    if (width <= 0 || height <= 0) {
      throw ValidationError("grid dimensions must be positive");
    }
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
      throw ValidationError("grid resolution must be > 0");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }

  bool contains(CellIndex c) const {
    return c.i >= 0 && c.j >= 0 && c.i < width_ && c.j < height_;
  }

  Cell at(CellIndex c) const { return cells_[index(c)]; }
  Cell at(int i, int j) const { return at(CellIndex{i, j}); }
  void set(CellIndex c, Cell v) { cells_[index(c)] = v; }
  void set(int i, int j, Cell v) { set(CellIndex{i, j}, v); }

  Vec2 cell_center(CellIndex c) const {
    return {origin_.x + (c.i + 0.5) * resolution_,
            origin_.y + (c.j + 0.5) * resolution_};
  }

  /// Cell containing `p`; may lie outside the grid.
  CellIndex world_to_cell(Vec2 p) const {
    return {static_cast<int>(std::floor((p.x - origin_.x) / resolution_)),
            static_cast<int>(std::floor((p.y - origin_.y) / resolution_))};
  }

  /// Label at a world point; points outside the grid read as obstacle.
  Cell label_at(Vec2 p) const {
    const CellIndex c = world_to_cell(p);
    if (!contains(c)) return Cell::kObstacle;
    return at(c);
  }

  double world_width() const { return width_ * resolution_; }
  double world_height() const { return height_ * resolution_; }

  const std::vector<Cell>& cells() const { return cells_; }

  std::size_t index(CellIndex c) const {
    return static_cast<std::size_t>(c.j) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.i);
  }

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  Vec2 origin_{};
  std::vector<Cell> cells_;
};

namespace detail {

// 1-D squared distance transform (Felzenszwalb & Huttenlocher) of a sampled
// function `f` (0 at sites, kFar elsewhere).
inline constexpr double kFar = 1e20;

inline void squared_dt_1d(const std::vector<double>& f, std::vector<double>& d,
                          std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  d.assign(n, 0.0);
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance (in cells^2) from every cell center to the
/// nearest cell center where `site` is true; +inf when there are no sites.
inline std::vector<double> squared_distance_transform(const std::vector<bool>& site, int width,
                                                      int height) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> g(site.size(), detail::kFar);
  std::vector<double> f, d, z;
  std::vector<int> v;
  // Columns first.
  f.resize(height);
  for (int i = 0; i < width; ++i) {
    for (int j = 0; j < height; ++j) f[j] = site[j * width + i] ? 0.0 : detail::kFar;
    detail::squared_dt_1d(f, d, v, z);
    for (int j = 0; j < height; ++j) g[j * width + i] = d[j];
  }
  f.resize(width);
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) f[i] = g[j * width + i];
    detail::squared_dt_1d(f, d, v, z);
    for (int i = 0; i < width; ++i) g[j * width + i] = d[i] >= 0.5 * detail::kFar ? kInf : d[i];
  }
  return g;
}

/// Signed distance (meters) from cell centers to the occupied set, sampled on
/// the grid and bilinearly interpolated in between. Positive in free space.
class DistanceField {
 public:
  DistanceField() = default;

  DistanceField(const OccupancyGrid& grid, bool objects_occupied)
      : width_(grid.width()),
        height_(grid.height()),
        resolution_(grid.resolution()),
        origin_(grid.origin()),
        values_(static_cast<std::size_t>(grid.width()) * grid.height()) {
    const std::size_t n = values_.size();
    std::vector<bool> occ(n), free(n);
    for (std::size_t k = 0; k < n; ++k) {
      const Cell c = grid.cells()[k];
      const bool o = c == Cell::kObstacle || (objects_occupied && c == Cell::kObject);
      occ[k] = o;
      free[k] = !o;
    }
    const auto to_occ = squared_distance_transform(occ, width_, height_);
    const auto to_free = squared_distance_transform(free, width_, height_);
    const double big = 1e3 * std::max(width_, height_) * resolution_;
    for (std::size_t k = 0; k < n; ++k) {
      if (occ[k]) {
        values_[k] = std::isfinite(to_free[k]) ? -std::sqrt(to_free[k]) * resolution_ : -big;
      } else {
        values_[k] = std::isfinite(to_occ[k]) ? std::sqrt(to_occ[k]) * resolution_ : big;
      }
    }
  }

  /// Interpolated value and gradient at a world point. Outside the grid the
  /// field continues linearly downward so that leaving the map is penalized.
  double eval(Vec2 p, Vec2* grad = nullptr) const {
    const double gx = (p.x - origin_.x) / resolution_ - 0.5;
    const double gy = (p.y - origin_.y) / resolution_ - 0.5;
    const double cx = std::clamp(gx, 0.0, double(width_ - 1));
    const double cy = std::clamp(gy, 0.0, double(height_ - 1));
    const int i0 = std::min(static_cast<int>(std::floor(cx)), std::max(width_ - 2, 0));
    const int j0 = std::min(static_cast<int>(std::floor(cy)), std::max(height_ - 2, 0));
    const int i1 = std::min(i0 + 1, width_ - 1);
    const int j1 = std::min(j0 + 1, height_ - 1);
    const double tx = cx - i0;
    const double ty = cy - j0;
    const double v00 = at(i0, j0), v10 = at(i1, j0), v01 = at(i0, j1), v11 = at(i1, j1);
    double val = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 +
                 tx * ty * v11;
    double dx = ((1 - ty) * (v10 - v00) + ty * (v11 - v01)) / resolution_;
    double dy = ((1 - tx) * (v01 - v00) + tx * (v11 - v10)) / resolution_;
    // Outside: subtract the distance to the clamped point.
    const double ox = (gx - cx) * resolution_;
    const double oy = (gy - cy) * resolution_;
    if (ox != 0.0 || oy != 0.0) {
      const double out = std::hypot(ox, oy);
      val -= out;
      dx = -ox / out;
      dy = -oy / out;
    }
    if (grad) *grad = {dx, dy};
    return val;
  }

  double at(int i, int j) const { return values_[static_cast<std::size_t>(j) * width_ + i]; }

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  Vec2 origin_{};
  std::vector<double> values_;
};

}  // namespace tduo
