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

#ifndef GRIDPLAN__DECODER_HPP_
#define GRIDPLAN__DECODER_HPP_

#include "gridplan/autograd.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/nn.hpp"

#include <span>
#include <string>
#include <vector>

namespace gridplan
{

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 1e3;
inline constexpr double kRhoBound = 0.99;

/**
 * @brief Bivariate Gaussian over the next position for B rows.
 *
 * mean = prev + offset ([B, 2]); sigma is [B, 2]; rho is [B, 1].
 */
struct GaussianStep
{
  ag::Tensor offset;
  ag::Tensor mean;
  ag::Tensor sigma;
  ag::Tensor rho;
};

/// Maps raw head outputs [B, 5] = (mu_x, mu_y, s_x, s_y, r) to a GaussianStep about `prev`.
GaussianStep gaussian_from_raw(const ag::Tensor & raw, const ag::Tensor & prev);

/// Per-row bivariate normal negative log-density of y ([B, 2]); returns [B].
ag::Tensor gaussian_nll(const GaussianStep & step, const ag::Tensor & y);

/// mean + L z with L the Cholesky factor of the covariance; z is B*2 standard normal values.
ag::Tensor gaussian_sample(const GaussianStep & step, std::span<const double> z);

/**
 * @brief Per-scenario inputs shared by every decoded row.
 *
 * Positions are in the frame of `spec` (world units). `reward_hidden` are the
 * N maps H^1..H^N of the reward recurrence, `ogm_hidden` the t_f maps H_t of
 * the OGM decoder; m0 is [1, motion_hidden].
 */
struct DecoderContext
{
  GridSpec spec;
  ag::Tensor scene;
  std::vector<ag::Tensor> reward_hidden;
  std::vector<ag::Tensor> ogm_hidden;
  ag::Tensor m0;
};

/// Plan features h^1..h^N for B rows as a [B, N, hidden] tensor.
struct PlanFeatures
{
  ag::Tensor features;

  int batch() const { return features.dim(0); }
  int horizon() const { return features.dim(1); }
};

enum class RolloutMode { kTeacherForced, kSampled };

RolloutMode parse_rollout_mode(const std::string & name);

struct Rollout
{
  std::vector<GaussianStep> steps;
  /// Positions Y_1..Y_tf ([B, 2] each): ground truth when teacher forced, samples otherwise.
  std::vector<ag::Tensor> positions;
  /// Sum over steps of gaussian_nll ([B]); only for teacher forcing.
  ag::Tensor nll;
};

struct DecoderConfig
{
  int scene_channels = 32;
  int reward_hidden = 32;
  int ogm_hidden = 32;
  int motion_hidden = 64;
  int hidden = 64;
  int heads = 4;
};

/**
 * @brief Plan-conditioned recurrent decoder of bivariate Gaussian steps.
 *
 * The plan encoder runs a GRU over phi[s^n, F(s^n), H^n(s^n)]. Each decoding
 * step attends over the plan features with h_{t-1} as query and advances a
 * second GRU on phi[a_t, Y_{t-1}, F(Y_{t-1}), H_t(Y_{t-1})]; h_0 = phi(m0).
 */
class TrajectoryDecoder
{
public:
  TrajectoryDecoder() = default;
  TrajectoryDecoder(const DecoderConfig & config, nn::Rng & rng);

  /// states[n] is [B, 2] in grid coordinates.
  PlanFeatures encode_plan(const std::vector<ag::Tensor> & states, const DecoderContext & ctx) const;
  /// h_prev is [B, hidden]; returns the [B, hidden] context a_t.
  ag::Tensor attend(
    const ag::Tensor & h_prev, const PlanFeatures & plan, std::vector<double> * weights = nullptr) const;
  ag::Tensor initial_state(const DecoderContext & ctx, int batch) const;
  /// One decoding step at future index t (0-based) from prev_pos ([B, 2] in the world frame of ctx.spec).
  std::pair<ag::Tensor, GaussianStep> decode_step(
    const ag::Tensor & h_prev, const ag::Tensor & a_t, const ag::Tensor & prev_pos, int t,
    const DecoderContext & ctx) const;

  /// Teacher-forced roll-out against a world-frame future shared by all rows.
  Rollout teacher_forced(
    const PlanFeatures & plan, const DecoderContext & ctx, std::span<const Vec2> future) const;
  /// Free-running reparameterized roll-out of t_f steps; z holds t_f * B * 2 standard normals.
  Rollout sampled(
    const PlanFeatures & plan, const DecoderContext & ctx, int t_f, std::span<const double> z) const;
  Rollout sampled(const PlanFeatures & plan, const DecoderContext & ctx, int t_f, nn::Rng & rng) const;

  const DecoderConfig & config() const { return config_; }
  nn::Linear & head() { return out_; }
  void visit(const nn::ParamVisitor & f, const std::string & prefix);

private:
  ag::Tensor lookup(const ag::Tensor & map, const ag::Tensor & grid_points) const;

  DecoderConfig config_;
  nn::Linear plan_embed_;
  nn::GRUCell plan_rnn_;
  nn::Linear h0_embed_;
  nn::MultiHeadAttention attention_;
  nn::Linear step_embed_;
  nn::GRUCell step_rnn_;
  nn::Linear out_;
};

/// Standard normal draws.
std::vector<double> normal_noise(std::size_t count, nn::Rng & rng);

}  // namespace gridplan

#endif  // GRIDPLAN__DECODER_HPP_
