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

#ifndef GRIDPLAN__ENCODERS_HPP_
#define GRIDPLAN__ENCODERS_HPP_

#include "gridplan/autograd.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/nn.hpp"
#include "gridplan/scenario.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace gridplan
{

/// Directional pooling grid of G x G cells covering `extent` around the target.
struct PoolingSpec
{
  int cells = 6;
  double extent = 200.0;

  int size() const { return 2 * cells * cells; }
};

struct NeighborState
{
  Vec2 position;
  Vec2 velocity;
};

/**
 * @brief Relative-velocity occupancy of neighbors around the target.
 *
 * Cell (ix, iy) holds the velocity of the neighbor inside it relative to the
 * target, at slots 2 * (iy * G + ix) + {0, 1}. If several neighbors share a
 * cell the one nearest to the target wins. Neighbors off the grid are ignored.
 */
std::vector<double> pooling_grid(
  Vec2 target_position, Vec2 target_velocity, std::span<const NeighborState> neighbors,
  const PoolingSpec & spec);

/// Pooling vector at history step t (1 <= t < t_p) of a scenario.
std::vector<double> pooling_grid(const ScenarioObservation & obs, int t, const PoolingSpec & spec);

/**
 * @brief Motion feature: the final recurrent state and its map form.
 *
 * `map` is [hidden + 2, G, G]: m0 broadcast over cells followed by each cell
 * center's agent-centered world x and y.
 */
struct MotionFeature
{
  ag::Tensor m0;   // [1, hidden]
  ag::Tensor map;  // [hidden + 2, G, G]

  /// `map` with coordinate channels divided by half the crop extent (input to learned embeddings).
  ag::Tensor embedding_input(double crop_extent) const;
};

/// Coordinate channels [2, G, G] holding agent-centered cell-center world coordinates.
ag::Tensor coordinate_channels(const GridSpec & spec);

class MotionEncoder
{
public:
  MotionEncoder() = default;
  MotionEncoder(const PoolingSpec & pooling, int hidden, nn::Rng & rng);

  /// Throws std::invalid_argument for fewer than 2 history points.
  MotionFeature operator()(const ScenarioObservation & obs, const GridSpec & spec) const;
  /// Per-step inputs [t_p - 1, 2 G^2 + 2]: pooling vector d_t followed by the velocity.
  ag::Tensor input_rows(const ScenarioObservation & obs) const;
  MotionFeature encode(const ag::Tensor & rows, const GridSpec & spec) const;
  void visit(const nn::ParamVisitor & f, const std::string & prefix);

  int hidden() const { return hidden_; }
  nn::GRUCell & cell() { return gru_; }

private:
  PoolingSpec pooling_;
  int hidden_ = 64;
  nn::Linear embed_;
  nn::GRUCell gru_;
};

/**
 * @brief Convolutional scene backbone: three blocks down to grid resolution.
 *
 * Strides are chosen from raster_size / grid_size in {1, 2, 4, 8}; the last
 * block is a kernel-2 stride-2 convolution whenever any downsampling happens.
 */
class SceneEncoder
{
public:
  SceneEncoder() = default;
  SceneEncoder(
    int in_channels, int raster_size, int grid_size, std::array<int, 2> widths, int out_channels,
    nn::Rng & rng);

  /// raster is [in_channels, raster_size, raster_size]; returns [out_channels, G, G].
  ag::Tensor operator()(const ag::Tensor & raster) const;
  void visit(const nn::ParamVisitor & f, const std::string & prefix);

  int out_channels() const { return out_channels_; }
  int raster_size() const { return raster_size_; }

private:
  int in_channels_ = 3;
  int raster_size_ = 200;
  int out_channels_ = 32;
  nn::Conv2d block1_, block2_, block3_;
};

}  // namespace gridplan

#endif  // GRIDPLAN__ENCODERS_HPP_
