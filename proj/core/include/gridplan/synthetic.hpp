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

#ifndef GRIDPLAN__SYNTHETIC_HPP_
#define GRIDPLAN__SYNTHETIC_HPP_

#include "gridplan/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gridplan
{

/// Road layouts; every layout joins its arms at one junction cell.
enum class Layout { kCorridor, kCurve, kTJunction, kCrossroads };

std::string to_string(Layout l);
Layout parse_layout(const std::string & name);

struct SyntheticConfig
{
  std::uint64_t seed = 1;
  int n_scenes = 8;
  int n_agents = 12;  // walkers per scene
  int cells = 25;
  double cell_size = 16.0;
  int road_width = 3;  // in cells, odd
  double speed_min = 4.0;
  double speed_max = 7.0;
  double lateral = 8.0;  // max lateral offset from the road centerline
  double jitter = 0.3;   // per-step position noise std
  int max_start_frame = 40;
  /// Layout of scene i is layouts[i % size]; all four when empty.
  std::vector<Layout> layouts;

  double world_size() const { return cells * cell_size; }
};

/// Arm directions: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
struct SyntheticScene
{
  int scene_id = 0;
  Layout layout = Layout::kCorridor;
  int junction_x = 0;
  int junction_y = 0;
  std::vector<int> arms;
  std::vector<std::uint8_t> cells;  // cells x cells semantic grid, row 0 at y = 0
};

struct SyntheticAgent
{
  int scene_id = 0;
  int agent_id = 0;
  int entry_arm = 0;
  int exit_arm = 0;
};

struct SyntheticCorpus
{
  SyntheticConfig config;
  std::vector<SyntheticScene> layouts;
  std::map<int, SceneImage> scenes;
  std::vector<DatasetRecord> records;
  std::vector<SyntheticAgent> agents;
};

/**
 * @brief Procedural road scenes with goal-directed walkers.
 *
 * Walkers enter at the end of one arm, cross the junction, and leave by an
 * arm chosen uniformly among the others, so junction scenes have
 * multimodal futures. Obstacles keep a two-cell margin from every road
 * cell and tracks that would touch one are redrawn. Scenes are generated
 * independently from (seed, scene index), so output is identical for
 * equal configurations.
 */
SyntheticCorpus generate_synthetic(const SyntheticConfig & config);

/// Writes trajectories.csv and scenes/scene_<id>.pgm in the layout read by load_dataset.
void write_corpus(const std::filesystem::path & dir, const SyntheticCorpus & corpus);

}  // namespace gridplan

#endif  // GRIDPLAN__SYNTHETIC_HPP_
