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

#ifndef GRIDPLAN__SCENARIO_HPP_
#define GRIDPLAN__SCENARIO_HPP_

#include "gridplan/grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gridplan
{

/// Semantic classes of synthetic and label-map rasters.
enum SemanticClass : std::uint8_t { kTerrain = 0, kRoad = 1, kObstacle = 2 };

/**
 * @brief Agent-centered square crop of the scene.
 *
 * `pixels` is [channels, size, size] with row 0 at the lowest world y and
 * column 0 at the lowest world x (same convention as GridField). Values are
 * 0..255. `road` is an optional size x size {0,1} mask.
 */
struct SceneRaster
{
  int size = 0;
  int channels = 3;
  double extent = 200.0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> road;

  bool has_road_mask() const { return !road.empty(); }
  /// Crop as a [channels, size, size] tensor scaled to [0, 1].
  ag::Tensor tensor() const;
  /// Road mask as a GridField over the crop, centered at `origin`.
  GridField road_mask(Vec2 origin) const;
};

struct NeighborTrack
{
  int agent_id = -1;
  std::vector<Vec2> positions;  // t_p points aligned with the target history
  std::vector<bool> valid;
};

/**
 * @brief One prediction instance.
 *
 * history[t_p - 1] is the agent position at t = 0 and the grid origin.
 */
struct ScenarioObservation
{
  std::string id;
  int scene_id = 0;
  int agent_id = 0;
  long frame = 0;
  double dt = 0.4;
  std::vector<Vec2> history;
  std::vector<NeighborTrack> neighbors;
  SceneRaster raster;
  std::vector<Vec2> future;

  Vec2 origin() const { return history.back(); }
  GridSpec grid(int grid_size, double crop_extent) const { return {grid_size, crop_extent, origin()}; }
};

}  // namespace gridplan

#endif  // GRIDPLAN__SCENARIO_HPP_
