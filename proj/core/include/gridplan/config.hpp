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

#ifndef GRIDPLAN__CONFIG_HPP_
#define GRIDPLAN__CONFIG_HPP_

#include "gridplan/model.hpp"
#include "gridplan/synthetic.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gridplan
{

enum class Stage { kOGM = 0, kDist = 1, kRefine = 2, kFinetune = 3 };

inline constexpr std::array<Stage, 4> kAllStages{Stage::kOGM, Stage::kDist, Stage::kRefine, Stage::kFinetune};

const char * to_string(Stage s);
Stage parse_stage(const std::string & name);
/// "all" or a comma-separated list of stage names, returned in pipeline order.
std::vector<Stage> parse_stages(const std::string & spec);

struct TrainConfig
{
  double beta = 0.2;
  double tau = 1.0;
  int num_samples = 200;     // C
  int reverse_samples = 2;   // trajectories drawn per scenario for the reverse cross-entropy
  int dist_samples = 20;     // samples scored as the predicted distribution in evaluation
  double lr_stage123 = 1e-3;
  double lr_stage4 = 1e-4;
  int batch_size = 32;
  std::array<int, 4> epochs{20, 20, 10, 5};
  double clip_norm = 10.0;
  /// Stage 4 adds this multiple of L_sce to the variety loss (0: variety loss only).
  double finetune_sce_weight = 0.0;
  /// Frozen stage outputs are cached when their estimated size stays below this many MiB.
  double cache_limit_mb = 2048.0;
  /// Caps on scenarios per split (0 = all); subsets are drawn with the run seed.
  int max_train = 0;
  int max_eval = 0;
  std::vector<Stage> stages{kAllStages.begin(), kAllStages.end()};
};

struct DataConfig
{
  /// Directory with trajectories.csv and scenes/; empty selects the synthetic generator.
  std::string path;
  SyntheticConfig synthetic;
  int window_stride = 1;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  bool augment = false;
  double dt = 0.4;
};

/**
 * @brief Every hyperparameter of a run.
 *
 * Serialized as JSON with the sections "model", "train" and "data" plus the
 * top-level "seed". Unknown keys are rejected.
 */
struct RunConfig
{
  std::uint64_t seed = 1;
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  void validate() const;
  double lr(Stage s) const { return s == Stage::kFinetune ? train.lr_stage4 : train.lr_stage123; }
  int epochs(Stage s) const { return train.epochs[static_cast<int>(s)]; }
  DatasetConfig dataset_config() const;

  std::string to_json() const;
  static RunConfig from_json(const std::string & text);
  static RunConfig load(const std::filesystem::path & path);
  void save(const std::filesystem::path & path) const;
};

}  // namespace gridplan

#endif  // GRIDPLAN__CONFIG_HPP_
