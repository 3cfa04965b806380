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

#include "gridplan/grid.hpp"

#include "gridplan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gridplan
{

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

void GridSpec::validate() const
{
  if (grid_size <= 0) throw std::invalid_argument("grid_size must be positive");
  if (!(crop_extent > 0.0)) throw std::invalid_argument("crop_extent must be positive");
}

Vec2 world_to_grid(Vec2 p, const GridSpec & spec)
{
  const double c = spec.cell_size();
  return {(p.x - spec.origin.x) / c + spec.center(), (p.y - spec.origin.y) / c + spec.center()};
}

Vec2 grid_to_world(Vec2 g, const GridSpec & spec)
{
  const double c = spec.cell_size();
  return {(g.x - spec.center()) * c + spec.origin.x, (g.y - spec.center()) * c + spec.origin.y};
}

std::array<int, 2> nearest_cell(Vec2 p, const GridSpec & spec)
{
  const Vec2 g = world_to_grid(p, spec);
  const int hi = spec.grid_size - 1;
  return {std::clamp(static_cast<int>(std::lround(g.x)), 0, hi),
          std::clamp(static_cast<int>(std::lround(g.y)), 0, hi)};
}

ag::Tensor world_to_grid(const ag::Tensor & points, const GridSpec & spec)
{
  const double inv = 1.0 / spec.cell_size();
  const auto offset = ag::Tensor::from(
    {spec.center() - spec.origin.x * inv, spec.center() - spec.origin.y * inv}, {2});
  return ag::add(ag::mul_scalar(points, inv), offset);
}

ag::Tensor grid_to_world(const ag::Tensor & coords, const GridSpec & spec)
{
  const double c = spec.cell_size();
  const auto offset = ag::Tensor::from(
    {spec.origin.x - spec.center() * c, spec.origin.y - spec.center() * c}, {2});
  return ag::add(ag::mul_scalar(coords, c), offset);
}

GridField::GridField(GridSpec spec_, int channels_, double fill)
: spec(spec_), channels(channels_),
  values(static_cast<std::size_t>(channels_) * spec_.cells(), fill)
{
  spec.validate();
}

GridField::GridField(GridSpec spec_, int channels_, std::vector<double> values_)
: spec(spec_), channels(channels_), values(std::move(values_))
{
  spec.validate();
  if (values.size() != static_cast<std::size_t>(channels) * spec.cells()) {
    throw std::invalid_argument("GridField: value count does not match channels x cells");
  }
}

double & GridField::at(int c, int ix, int iy)
{
  return values[(static_cast<std::size_t>(c) * spec.grid_size + iy) * spec.grid_size + ix];
}

double GridField::at(int c, int ix, int iy) const
{
  return values[(static_cast<std::size_t>(c) * spec.grid_size + iy) * spec.grid_size + ix];
}

ag::Tensor GridField::tensor(bool requires_grad) const
{
  return ag::Tensor::from(values, {channels, spec.grid_size, spec.grid_size}, requires_grad);
}

GridField GridField::from_tensor(const ag::Tensor & t, const GridSpec & spec)
{
  if (t.rank() != 3 || t.dim(1) != spec.grid_size || t.dim(2) != spec.grid_size) {
    throw std::invalid_argument("GridField::from_tensor: expected [C,G,G], got " +
                                ag::shape_str(t.shape()));
  }
  return GridField(spec, t.dim(0), std::vector<double>(t.data().begin(), t.data().end()));
}

BilinearWeights bilinear_weights(Vec2 q, int grid_size)
{
  const double hi = grid_size - 1;
  const double cx = std::clamp(q.x, 0.0, hi);
  const double cy = std::clamp(q.y, 0.0, hi);
  const int x0 = grid_size > 1 ? std::min(static_cast<int>(std::floor(cx)), grid_size - 2) : 0;
  const int y0 = grid_size > 1 ? std::min(static_cast<int>(std::floor(cy)), grid_size - 2) : 0;
  const int x1 = grid_size > 1 ? x0 + 1 : 0;
  const int y1 = grid_size > 1 ? y0 + 1 : 0;
  const double fx = cx - x0;
  const double fy = cy - y0;
  const auto g = static_cast<std::size_t>(grid_size);
  BilinearWeights w;
  w.cells = {y0 * g + x0, y0 * g + x1, y1 * g + x0, y1 * g + x1};
  w.weights = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return w;
}

std::vector<double> bilinear(const GridField & field, Vec2 q)
{
  if (!std::isfinite(q.x) || !std::isfinite(q.y)) {
    throw std::domain_error("bilinear: non-finite query coordinate");
  }
  const BilinearWeights w = bilinear_weights(q, field.spec.grid_size);
  const std::size_t plane = static_cast<std::size_t>(field.spec.cells());
  std::vector<double> out(static_cast<std::size_t>(field.channels), 0.0);
  for (int c = 0; c < field.channels; ++c) {
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double v = field.values[c * plane + w.cells[k]];
      if (!std::isfinite(v)) {
        throw std::domain_error("bilinear: non-finite field value in channel " + std::to_string(c));
      }
      acc += w.weights[k] * v;
    }
    out[static_cast<std::size_t>(c)] = acc;
  }
  return out;
}

}  // namespace gridplan
