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

#ifndef GRIDPLAN__REFINEMENT_HPP_
#define GRIDPLAN__REFINEMENT_HPP_

#include "gridplan/autograd.hpp"
#include "gridplan/nn.hpp"

#include <string>
#include <vector>

namespace gridplan
{

struct RefinementConfig
{
  int t_f = 12;
  int motion_hidden = 64;
  int d_model = 64;
  int heads = 8;
  int layers = 3;
  int ffn = 128;
  int k = 20;
  double dropout = 0.1;
  /// Trajectories are divided by this before embedding and outputs multiplied back.
  double position_scale = 100.0;
};

/// Post-norm transformer encoder layer without positional information.
struct EncoderLayer
{
  EncoderLayer() = default;
  EncoderLayer(int d, int heads, int ffn, nn::Rng & rng);

  ag::Tensor operator()(const ag::Tensor & x, double p, bool training, nn::Rng & rng) const;
  void visit(const nn::ParamVisitor & f, const std::string & prefix);

  nn::MultiHeadAttention self_attn;
  nn::LayerNorm norm1, norm2;
  nn::Linear ff1, ff2;
};

/// Post-norm transformer decoder layer (self-attention, cross-attention, FFN), no masking.
struct DecoderLayer
{
  DecoderLayer() = default;
  DecoderLayer(int d, int heads, int ffn, nn::Rng & rng);

  ag::Tensor operator()(
    const ag::Tensor & x, const ag::Tensor & memory, double p, bool training, nn::Rng & rng) const;
  void visit(const nn::ParamVisitor & f, const std::string & prefix);

  nn::MultiHeadAttention self_attn, cross_attn;
  nn::LayerNorm norm1, norm2, norm3;
  nn::Linear ff1, ff2;
};

/**
 * @brief Non-autoregressive set decoder from C samples to K representatives.
 *
 * Samples are flattened to 2 * t_f vectors and embedded; decoder queries are
 * embed(m0) plus K learned vectors; all K outputs are produced in one pass.
 */
class RefinementNetwork
{
public:
  RefinementNetwork() = default;
  RefinementNetwork(const RefinementConfig & config, nn::Rng & rng);

  /**
   * samples is [S, C, 2 * t_f] (S scenarios, positions relative to each agent),
   * m0 is [S, motion_hidden]. Returns [S, K, 2 * t_f]. Throws on C = 0.
   */
  ag::Tensor operator()(
    const ag::Tensor & samples, const ag::Tensor & m0, bool training, nn::Rng & rng) const;
  /// Evaluation-mode convenience (dropout off).
  ag::Tensor operator()(const ag::Tensor & samples, const ag::Tensor & m0) const;

  const RefinementConfig & config() const { return config_; }
  void visit(const nn::ParamVisitor & f, const std::string & prefix);

private:
  RefinementConfig config_;
  nn::Linear traj_embed_;
  nn::Linear motion_embed_;
  ag::Tensor queries_;  // [K, d]
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  nn::Linear out_;
};

struct KMeansResult
{
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;
  std::vector<double> objective;  // within-cluster sum of squares after each iteration
  int iterations = 0;
};

/**
 * @brief Lloyd's algorithm with k-means++ seeding on flattened trajectories.
 *
 * Stops after `max_iter` iterations or when no centroid moves by more than
 * `tol`. If fewer than K distinct points exist, the missing centroids are
 * copies of the samples nearest to existing centroids (a warning is logged).
 * Throws std::invalid_argument if points.size() < k or k < 1.
 */
KMeansResult kmeans(
  const std::vector<std::vector<double>> & points, int k, nn::Rng & rng, int max_iter = 100,
  double tol = 1e-6);

}  // namespace gridplan

#endif  // GRIDPLAN__REFINEMENT_HPP_
