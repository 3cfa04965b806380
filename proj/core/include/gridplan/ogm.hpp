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

#ifndef GRIDPLAN__OGM_HPP_
#define GRIDPLAN__OGM_HPP_

#include "gridplan/autograd.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/nn.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gridplan
{

/**
 * @brief Temporal occupancy grid maps O_1..O_tf for one scenario.
 *
 * Each map is a [G, G] tensor of cell masses summing to one. `hidden` holds
 * the per-step recurrent maps consumed by the trajectory decoder. `scales`
 * records the renormalization factor applied after each deconvolution step
 * (1 when no mass left the grid; empty for the direct variants).
 */
struct OGMSequence
{
  GridSpec spec;
  ag::Tensor o0;
  std::vector<ag::Tensor> maps;
  std::vector<ag::Tensor> hidden;
  std::vector<double> scales;

  int steps() const { return static_cast<int>(maps.size()); }
  GridField field(int t) const;
};

/**
 * @brief One step of pixel-adaptive normalized deconvolution.
 *
 * Every cell of `o_prev` ([G, G], sums to one) scatters its mass over its
 * k x k neighborhood with weights softmax(kernel_logits[:, cell]) where
 * kernel_logits is [k*k, G, G]. Mass landing off the grid is dropped and the
 * result renormalized; `scale` receives the renormalization factor.
 * Throws std::domain_error if o_prev is negative or not normalized within `tol`.
 */
ag::Tensor normalized_deconv_step(
  const ag::Tensor & o_prev, const ag::Tensor & kernel_logits, double * scale = nullptr,
  double tol = 1e-6);

GridField normalized_deconv_step(const GridField & o_prev, const GridField & kernel_logits);

enum class OGMVariant { kDeconv, kConvLSTMDirect, kCNNStatic };

/// "deconv", "convlstm_direct" or "cnn_static"; throws std::invalid_argument otherwise.
OGMVariant parse_ogm_variant(const std::string & name);
std::string to_string(OGMVariant v);

struct OGMConfig
{
  int grid_size = 25;
  int scene_channels = 32;
  int motion_channels = 66;
  int hidden = 32;
  int layers = 2;
  int kernel = 5;
  OGMVariant variant = OGMVariant::kDeconv;
};

/**
 * @brief OGM decoder: stacked ConvLSTM over the scene map with H_0 = Phi(M).
 *
 * The deconvolution variant predicts per-cell kernel logits from the top
 * hidden map and advances O_{t-1} -> O_t from a learned O_0. The direct
 * variants emit a softmax map per step (convlstm_direct) or once (cnn_static).
 */
class OGMDecoder
{
public:
  OGMDecoder() = default;
  OGMDecoder(const OGMConfig & config, nn::Rng & rng);

  /// scene is [scene_channels, G, G]; motion is the embedding input [motion_channels, G, G].
  OGMSequence operator()(
    const ag::Tensor & scene, const ag::Tensor & motion, int t_f, const GridSpec & spec) const;

  /// Softmax of the learned O_0 logits as a [G, G] map.
  ag::Tensor initial_map() const;
  const OGMConfig & config() const { return config_; }
  ag::Tensor & o0_logits() { return o0_logits_; }
  nn::Conv2d & kernel_head() { return head_; }
  void visit(const nn::ParamVisitor & f, const std::string & prefix);

private:
  OGMConfig config_;
  ag::Tensor o0_logits_;  // [G, G]
  std::vector<nn::Conv2d> embed_;
  std::vector<nn::ConvLSTMCell> cells_;
  nn::Conv2d static_;
  nn::Conv2d head_;
};

/**
 * @brief Per-row log-likelihood of trajectories under the OGMs.
 *
 * grid_points[t] is [B, 2] in grid coordinates; returns [B] with
 * sum_t log(bilinear(O_t, grid_points[t]) + eps). Points are clamped to the grid.
 */
ag::Tensor ogm_log_likelihood(
  const std::vector<ag::Tensor> & maps, const std::vector<ag::Tensor> & grid_points,
  double eps = 1e-12);

/// -sum_t log(O_t(Y_t) + eps) for a world-coordinate future.
ag::Tensor ogm_nll(const OGMSequence & ogms, std::span<const Vec2> future, double eps = 1e-12);

/// Text dump: header "gridplan-ogm 1 <grid_size> <t_f> <crop_extent> <origin x> <origin y>", then t_f grids of G rows (iy ascending), 9 significant digits.
void write_ogm_dump(std::ostream & out, const OGMSequence & ogms);
/// Reads maps written by write_ogm_dump (hidden maps are not stored). Throws std::runtime_error on malformed input.
OGMSequence read_ogm_dump(std::istream & in);

}  // namespace gridplan

#endif  // GRIDPLAN__OGM_HPP_
