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

#include "gridplan/encoders.hpp"

#include "gridplan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gridplan
{

ag::Tensor SceneRaster::tensor() const
{
  const std::size_t n = static_cast<std::size_t>(channels) * size * size;
  if (pixels.size() != n) {
    throw std::invalid_argument("SceneRaster: pixel buffer does not match size and channels");
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = pixels[i] / 255.0;
  return ag::Tensor::from(std::move(v), {channels, size, size});
}

GridField SceneRaster::road_mask(Vec2 origin) const
{
  if (!has_road_mask()) throw std::logic_error("SceneRaster: no road mask");
  GridField f(GridSpec{size, extent, origin}, 1);
  for (std::size_t i = 0; i < road.size(); ++i) f.values[i] = road[i] ? 1.0 : 0.0;
  return f;
}

std::vector<double> pooling_grid(
  Vec2 target_position, Vec2 target_velocity, std::span<const NeighborState> neighbors,
  const PoolingSpec & spec)
{
  if (spec.cells <= 0 || !(spec.extent > 0.0)) {
    throw std::invalid_argument("pooling_grid: cells and extent must be positive");
  }
  const int g = spec.cells;
  const double cell = spec.extent / g;
  std::vector<double> out(static_cast<std::size_t>(spec.size()), 0.0);
  std::vector<double> best(static_cast<std::size_t>(g * g), std::numeric_limits<double>::infinity());
  for (const NeighborState & nb : neighbors) {
    const Vec2 rel = nb.position - target_position;
    const int ix = static_cast<int>(std::floor((rel.x + 0.5 * spec.extent) / cell));
    const int iy = static_cast<int>(std::floor((rel.y + 0.5 * spec.extent) / cell));
    if (ix < 0 || iy < 0 || ix >= g || iy >= g) continue;
    const int c = iy * g + ix;
    const double d = norm(rel);
    if (d >= best[c]) continue;
    best[c] = d;
    const Vec2 dv = nb.velocity - target_velocity;
    out[2 * c] = dv.x;
    out[2 * c + 1] = dv.y;
  }
  return out;
}

std::vector<double> pooling_grid(const ScenarioObservation & obs, int t, const PoolingSpec & spec)
{
  const int tp = static_cast<int>(obs.history.size());
  if (t < 1 || t >= tp) throw std::out_of_range("pooling_grid: history step out of range");
  const Vec2 pos = obs.history[t];
  const Vec2 vel = pos - obs.history[t - 1];
  std::vector<NeighborState> states;
  for (const NeighborTrack & nb : obs.neighbors) {
    if (static_cast<int>(nb.positions.size()) != tp || static_cast<int>(nb.valid.size()) != tp) {
      continue;
    }
    if (!nb.valid[t]) continue;
    const Vec2 v = nb.valid[t - 1] ? nb.positions[t] - nb.positions[t - 1] : Vec2{};
    states.push_back({nb.positions[t], v});
  }
  return pooling_grid(pos, vel, states, spec);
}

ag::Tensor coordinate_channels(const GridSpec & spec)
{
  const int g = spec.grid_size;
  std::vector<double> v(static_cast<std::size_t>(2 * g * g));
  for (int iy = 0; iy < g; ++iy) {
    for (int ix = 0; ix < g; ++ix) {
      v[iy * g + ix] = (ix - spec.center()) * spec.cell_size();
      v[g * g + iy * g + ix] = (iy - spec.center()) * spec.cell_size();
    }
  }
  return ag::Tensor::from(std::move(v), {2, g, g});
}

ag::Tensor MotionFeature::embedding_input(double crop_extent) const
{
  const int c = map.dim(0);
  const ag::Tensor head = ag::slice(map, 0, 0, c - 2);
  const ag::Tensor coords = ag::slice(map, 0, c - 2, c) * (2.0 / crop_extent);
  return ag::concat({head, coords}, 0);
}

MotionEncoder::MotionEncoder(const PoolingSpec & pooling, int hidden, nn::Rng & rng)
: pooling_(pooling),
  hidden_(hidden),
  embed_(pooling.size() + 2, hidden, rng),
  gru_(hidden, hidden, rng)
{
}

MotionFeature MotionEncoder::operator()(const ScenarioObservation & obs, const GridSpec & spec) const
{
  return encode(input_rows(obs), spec);
}

ag::Tensor MotionEncoder::input_rows(const ScenarioObservation & obs) const
{
  const int tp = static_cast<int>(obs.history.size());
  if (tp < 2) throw std::invalid_argument("MotionEncoder: need at least 2 history points");
  const int in = pooling_.size() + 2;
  std::vector<double> rows(static_cast<std::size_t>(tp - 1) * in);
  for (int t = 1; t < tp; ++t) {
    const std::vector<double> d = pooling_grid(obs, t, pooling_);
    const Vec2 vel = obs.history[t] - obs.history[t - 1];
    double * row = rows.data() + static_cast<std::size_t>(t - 1) * in;
    std::copy(d.begin(), d.end(), row);
    row[in - 2] = vel.x;
    row[in - 1] = vel.y;
  }
  return ag::Tensor::from(std::move(rows), {tp - 1, in});
}

MotionFeature MotionEncoder::encode(const ag::Tensor & rows, const GridSpec & spec) const
{
  if (rows.rank() != 2 || rows.dim(1) != pooling_.size() + 2) {
    throw std::invalid_argument("MotionEncoder: unexpected input rows " + ag::shape_str(rows.shape()));
  }
  const ag::Tensor x = embed_(rows);
  ag::Tensor h = ag::Tensor::zeros({1, hidden_});
  for (int t = 0; t < rows.dim(0); ++t) h = gru_(ag::slice(x, 0, t, t + 1), h);

  const int g = spec.grid_size;
  const ag::Tensor ones = ag::Tensor::full({1, g, g}, 1.0);
  const ag::Tensor broadcast = ag::reshape(h, {hidden_, 1, 1}) * ones;
  return {h, ag::concat({broadcast, coordinate_channels(spec)}, 0)};
}

void MotionEncoder::visit(const nn::ParamVisitor & f, const std::string & prefix)
{
  embed_.visit(f, prefix + "embed.");
  gru_.visit(f, prefix + "gru.");
}

namespace
{
std::array<int, 3> stride_schedule(int raster, int grid)
{
  if (grid <= 0 || raster % grid != 0) {
    throw std::invalid_argument("SceneEncoder: raster size must be a multiple of the grid size");
  }
  switch (raster / grid) {
    case 1: return {1, 1, 1};
    case 2: return {1, 1, 2};
    case 4: return {2, 1, 2};
    case 8: return {2, 2, 2};
    default:
      throw std::invalid_argument("SceneEncoder: raster/grid ratio must be 1, 2, 4 or 8");
  }
}
}  // namespace

SceneEncoder::SceneEncoder(
  int in_channels, int raster_size, int grid_size, std::array<int, 2> widths, int out_channels,
  nn::Rng & rng)
: in_channels_(in_channels), raster_size_(raster_size), out_channels_(out_channels)
{
  const auto s = stride_schedule(raster_size, grid_size);
  block1_ = nn::Conv2d(in_channels, widths[0], 3, s[0], 1, rng);
  block2_ = nn::Conv2d(widths[0], widths[1], 3, s[1], 1, rng);
  block3_ = s[2] == 2 ? nn::Conv2d(widths[1], out_channels, 2, 2, 0, rng)
                      : nn::Conv2d(widths[1], out_channels, 3, 1, 1, rng);
}

ag::Tensor SceneEncoder::operator()(const ag::Tensor & raster) const
{
  if (raster.rank() != 3 || raster.dim(0) != in_channels_ || raster.dim(1) != raster_size_ ||
      raster.dim(2) != raster_size_) {
    throw std::invalid_argument(
      "SceneEncoder: expected raster " + ag::shape_str({in_channels_, raster_size_, raster_size_}) +
      ", got " + ag::shape_str(raster.shape()));
  }
  ag::Tensor x = ag::relu(block1_(raster));
  x = ag::relu(block2_(x));
  return block3_(x);
}

void SceneEncoder::visit(const nn::ParamVisitor & f, const std::string & prefix)
{
  block1_.visit(f, prefix + "block1.");
  block2_.visit(f, prefix + "block2.");
  block3_.visit(f, prefix + "block3.");
}

}  // namespace gridplan
