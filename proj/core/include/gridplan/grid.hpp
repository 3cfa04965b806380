// Copyright 2026 The gridplan Authors
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

#ifndef GRIDPLAN__GRID_HPP_
#define GRIDPLAN__GRID_HPP_

#include "gridplan/autograd.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace gridplan
{

struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

double norm(Vec2 v);

/**
 * @brief Geometry of the square agent-centered, world-aligned grid.
 *
 * Cell centers sit at integer grid coordinates; cell (0, 0) is the lower-left
 * cell in world axes, x grows with grid column and y with grid row. The agent
 * position `origin` maps to the grid center (grid_size - 1) / 2.
 */
struct GridSpec
{
  int grid_size = 25;
  double crop_extent = 200.0;
  Vec2 origin{};

  double cell_size() const { return crop_extent / grid_size; }
  double center() const { return 0.5 * (grid_size - 1); }
  int cells() const { return grid_size * grid_size; }
  /// Throws std::invalid_argument unless grid_size > 0 and crop_extent > 0.
  void validate() const;
};

Vec2 world_to_grid(Vec2 p, const GridSpec & spec);
Vec2 grid_to_world(Vec2 g, const GridSpec & spec);

/// Nearest cell (clamped to the grid) containing a world point.
std::array<int, 2> nearest_cell(Vec2 p, const GridSpec & spec);

/// Differentiable world -> grid map applied to [P, 2] rows.
ag::Tensor world_to_grid(const ag::Tensor & points, const GridSpec & spec);
/// Differentiable grid -> world map applied to [P, 2] rows.
ag::Tensor grid_to_world(const ag::Tensor & coords, const GridSpec & spec);

/**
 * @brief A grid of per-cell channel vectors.
 *
 * Storage is channel-major: values[(c * grid_size + iy) * grid_size + ix].
 */
struct GridField
{
  GridSpec spec;
  int channels = 1;
  std::vector<double> values;

  GridField() = default;
  GridField(GridSpec spec, int channels, double fill = 0.0);
  GridField(GridSpec spec, int channels, std::vector<double> values);

  double & at(int c, int ix, int iy);
  double at(int c, int ix, int iy) const;

  /// View as a [channels, grid_size, grid_size] tensor (copy).
  ag::Tensor tensor(bool requires_grad = false) const;
  static GridField from_tensor(const ag::Tensor & t, const GridSpec & spec);
};

/// Four corner cells and their tensor-product weights for a clamped query.
struct BilinearWeights
{
  std::array<std::size_t, 4> cells{};  // (x0,y0), (x1,y0), (x0,y1), (x1,y1), flat iy * G + ix
  std::array<double, 4> weights{};
};

BilinearWeights bilinear_weights(Vec2 q, int grid_size);

/// Channel vector interpolated at continuous grid coordinate q (clamped to the grid).
std::vector<double> bilinear(const GridField & field, Vec2 q);

}  // namespace gridplan

#endif  // GRIDPLAN__GRID_HPP_
