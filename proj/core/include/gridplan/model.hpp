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

#ifndef GRIDPLAN__MODEL_HPP_
#define GRIDPLAN__MODEL_HPP_

#include "gridplan/decoder.hpp"
#include "gridplan/encoders.hpp"
#include "gridplan/mdp.hpp"
#include "gridplan/objectives.hpp"
#include "gridplan/ogm.hpp"
#include "gridplan/refinement.hpp"
#include "gridplan/scenario.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gridplan
{

struct ModelConfig
{
  int grid_size = 25;
  double crop_extent = 200.0;
  int horizon = 20;  // N
  int t_p = 8;
  int t_f = 12;
  int raster_size = 200;
  int scene_width1 = 16;
  int scene_width2 = 32;
  int scene_channels = 32;
  int pooling_cells = 6;
  int hidden = 64;  // motion encoder and trajectory decoder
  int heads = 4;
  int ogm_hidden = 32;
  int ogm_layers = 2;
  int deconv_k = 5;
  OGMVariant ogm_variant = OGMVariant::kDeconv;
  int reward_hidden = 32;
  RewardVariant reward_variant = RewardVariant::kNonStationary;
  int refine_d_model = 64;
  int refine_heads = 8;
  int refine_layers = 3;
  int refine_ffn = 128;
  int k = 20;
  double dropout = 0.1;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
  /// Stable text form of every architecture field (input of the fingerprint).
  std::string canonical() const;
  std::uint64_t fingerprint() const;
};

enum class ParamGroup { kEncoder, kOGM, kPolicy, kDecoder, kRefinement };

const char * to_string(ParamGroup g);

/// Scene map F, motion feature and the embedding input shared by the heads.
struct Encoding
{
  GridSpec spec;
  ag::Tensor scene;         // [scene_channels, G, G]
  MotionFeature motion;     // m0 [1, hidden], map [hidden + 2, G, G]
  ag::Tensor motion_input;  // [hidden + 2, G, G]
};

struct PolicyOutput
{
  RewardStack rewards;
  PolicyTensors policy;
};

/// C sampled plans and their decoded trajectories in the world frame.
struct SampleSet
{
  SoftPlan plans;
  Rollout rollout;

  int count() const { return plans.batch(); }
  /// [1, C, 2 * t_f] positions relative to `origin`, differentiable.
  ag::Tensor relative(Vec2 origin) const;
  std::vector<Trajectory> trajectories() const;
};

/**
 * @brief Full predictor: encoders, OGM decoder, policy network, trajectory
 * decoder and refinement network.
 */
class GridPlanModel
{
public:
  GridPlanModel() = default;
  GridPlanModel(const ModelConfig & config, std::uint64_t seed);

  Encoding encode(const ScenarioObservation & obs) const;
  OGMSequence ogms(const Encoding & enc) const;
  GridMDP mdp(const GridSpec & spec) const { return {spec, config_.horizon}; }
  PolicyOutput policy(const Encoding & enc) const;
  DecoderContext context(const Encoding & enc, const PolicyOutput & pol, const OGMSequence & ogms) const;

  /// Teacher-forced rollout along the rasterized ground-truth plan.
  Rollout teacher_forced(const DecoderContext & ctx, const Plan & gt_plan, std::span<const Vec2> future) const;
  /// Samples `count` plans from the policy (Gumbel-Softmax, temperature tau) and decodes them.
  SampleSet sample(
    const DecoderContext & ctx, const PolicyOutput & pol, int count, double tau, nn::Rng & rng) const;
  /// K representatives relative to the agent: [1, K, 2 * t_f].
  ag::Tensor refine(const ag::Tensor & relative_samples, const Encoding & enc, bool training, nn::Rng & rng) const;

  const ModelConfig & config() const { return config_; }
  void visit(const nn::ParamVisitor & f);
  void visit(ParamGroup group, const nn::ParamVisitor & f);
  nn::NamedParams parameters();
  std::vector<ag::Tensor> parameters(const std::vector<ParamGroup> & groups);
  void set_trainable(ParamGroup group, bool trainable);

private:
  ModelConfig config_;
  SceneEncoder scene_;
  MotionEncoder motion_;
  OGMDecoder ogm_;
  PolicyNetwork policy_;
  TrajectoryDecoder decoder_;
  RefinementNetwork refinement_;
};

/// Grid coordinates of the agent cell for `batch` rows: [batch, 2].
ag::Tensor center_states(const GridSpec & spec, int batch);

}  // namespace gridplan

#endif  // GRIDPLAN__MODEL_HPP_
