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

#ifndef GRIDPLAN__MDP_HPP_
#define GRIDPLAN__MDP_HPP_

#include "gridplan/autograd.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/nn.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace gridplan
{

/// Planning actions. `kEnd` leads to the absorbing state.
enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kEnd = 4 };
inline constexpr int kNumActions = 5;
/// Hard-plan marker for steps spent in the absorbing state after `kEnd`.
inline constexpr int kAbsorbed = -1;

/// Cell displacement (dx, dy) per action; up is +y.
inline constexpr std::array<std::array<int, 2>, kNumActions> kActionDelta{
  {{0, 1}, {0, -1}, {-1, 0}, {1, 0}, {0, 0}}};

const char * action_name(int action);

/**
 * @brief Deterministic grid MDP with an absorbing sink.
 *
 * States are cells indexed iy * G + ix plus the absorbing slot at index
 * cells(). Moves that would leave the grid keep the state unchanged.
 */
struct GridMDP
{
  GridSpec spec;
  int horizon = 20;

  int cells() const { return spec.cells(); }
  int absorbing() const { return spec.cells(); }
  int cell_index(int ix, int iy) const { return iy * spec.grid_size + ix; }
  /// Successor of `cell` under `action`; returns absorbing() for kEnd.
  int transition(int cell, int action) const;
  /// Flat [cells * kNumActions] successor table.
  std::vector<int> transition_table() const;
};

/**
 * @brief Output of the policy network's reward stage for one scenario.
 *
 * `rewards` is [N, cells, kNumActions]; `hidden` holds the N recurrent hidden
 * maps H^1..H^N ([channels, G, G] each) consumed by the plan encoder.
 */
struct RewardStack
{
  ag::Tensor rewards;
  std::vector<ag::Tensor> hidden;
};

/// Differentiable value-iteration output: log pi is [N, cells, 5], values is [N+1, cells].
struct PolicyTensors
{
  ag::Tensor log_pi;
  ag::Tensor values;
};

/**
 * @brief Approximate (soft) value iteration over a non-stationary reward stack.
 *
 * V^N = 0; for n = N..1: Q^n(s,a) = r^n(s,a) + V^n(T(s,a)),
 * V^{n-1} = logsumexp_a Q^n, pi^n = softmax_a Q^n. The absorbing state keeps
 * value 0. Throws std::domain_error on non-finite rewards.
 */
PolicyTensors value_iteration(const ag::Tensor & rewards, const GridMDP & mdp);

/// Plain-data copy of a policy: pi[((n-1) * cells + s) * 5 + a] for n = 1..N.
struct NonStationaryPolicy
{
  int horizon = 0;
  int cells = 0;
  std::vector<double> pi;
  std::vector<double> values;  // (N+1) x cells, values[n * cells + s] = V^n(s)

  double prob(int n, int cell, int action) const;
  double value(int n, int cell) const { return values[static_cast<std::size_t>(n) * cells + cell]; }
};

NonStationaryPolicy to_policy(const PolicyTensors & tensors);

/**
 * @brief An N-step plan.
 *
 * `states` are grid coordinates s^1..s^N. Hard plans carry `actions`
 * (kAbsorbed after kEnd); soft plans carry `soft_actions` on the simplex.
 */
struct Plan
{
  std::vector<Vec2> states;
  std::vector<int> actions;
  std::vector<std::array<double, kNumActions>> soft_actions;

  int horizon() const { return static_cast<int>(states.size()); }
  /// Number of actions taken before entering the absorbing state (excluding kEnd).
  int moves() const;
};

/**
 * @brief Rasterizes a future trajectory into a hard plan.
 *
 * Points snap to their nearest cell; consecutive distinct cells are joined by
 * axis-aligned moves (x before y); the plan ends with kEnd and absorbing stays,
 * or is truncated to N moves with a logged warning.
 */
Plan extract_gt_plan(std::span<const Vec2> future, const GridMDP & mdp);

/// Sum of log pi^n(a^n | s^n) over non-absorbed steps; -inf if a taken action has probability 0.
double plan_log_likelihood(const Plan & plan, const NonStationaryPolicy & policy);

/// Differentiable plan log-likelihood with per-step log-probabilities floored at log(clip_eps).
ag::Tensor plan_log_likelihood(
  const Plan & plan, const ag::Tensor & log_pi, const GridMDP & mdp, double clip_eps = 1e-12);

/// Per-step action-probability fields [5, G, G] built from log pi.
std::vector<ag::Tensor> policy_fields(const ag::Tensor & log_pi, int grid_size);

/// Standard Gumbel(0, 1) draws.
std::vector<double> gumbel_noise(std::size_t count, nn::Rng & rng);

/// softmax((logits + noise) / tau) along the last axis; throws on tau <= 0.
ag::Tensor gumbel_softmax(const ag::Tensor & logits, std::span<const double> noise, double tau);

/// A batch of B relaxed plans: N tensors of states [B, 2] (grid coords) and actions [B, 5].
struct SoftPlan
{
  std::vector<ag::Tensor> states;
  std::vector<ag::Tensor> actions;

  int horizon() const { return static_cast<int>(states.size()); }
  int batch() const { return states.empty() ? 0 : states.front().dim(0); }
  /// Row b as a plain Plan (soft actions filled).
  Plan row(int b) const;
};

/**
 * @brief Relaxed policy roll-out with the Gumbel-Softmax trick.
 *
 * At each step the action distribution at the continuous state is bilinearly
 * interpolated from `fields[n]`, renormalized, perturbed with the given
 * Gumbel noise (N * B * 5 values) and relaxed at temperature tau. The state
 * then moves by the expected displacement and is clamped to the grid.
 */
SoftPlan sample_plan(
  const std::vector<ag::Tensor> & fields, const ag::Tensor & start, double tau,
  std::span<const double> noise, double eps = 1e-12);

/// Convenience overload drawing fresh noise from `rng`.
SoftPlan sample_plan(
  const std::vector<ag::Tensor> & fields, const ag::Tensor & start, double tau, nn::Rng & rng);

/// Converts a hard plan into [1, 2] state tensors (no gradient).
std::vector<ag::Tensor> plan_state_tensors(const Plan & plan);

/// How rewards and policies are produced.
enum class RewardVariant { kNonStationary, kStationary, kBehaviorCloning };

RewardVariant parse_reward_variant(const std::string & name);
std::string to_string(RewardVariant v);

/**
 * @brief Reward head and policy computation.
 *
 * The non-stationary variant runs a one-layer ConvLSTM over the scene map
 * with initial hidden map Phi(M) and maps each hidden map to 5 action
 * rewards. The stationary variant maps [F, Phi(M)] through two 1x1 layers
 * into a single reward map reused for all steps. Behaviour cloning emits
 * per-step logits that are used directly as the policy.
 */
class PolicyNetwork
{
public:
  PolicyNetwork() = default;
  PolicyNetwork(
    int scene_channels, int motion_channels, int hidden, int horizon, RewardVariant variant,
    nn::Rng & rng);

  /// F is [scene_channels, G, G]; M is [motion_channels, G, G].
  RewardStack reward_head(const ag::Tensor & scene, const ag::Tensor & motion) const;
  PolicyTensors policy(const RewardStack & rewards, const GridMDP & mdp) const;

  RewardVariant variant() const { return variant_; }
  int horizon() const { return horizon_; }
  int hidden() const { return hidden_; }
  nn::Conv2d & output_layer() { return out_; }
  void visit(const nn::ParamVisitor & f, const std::string & prefix);

private:
  RewardVariant variant_ = RewardVariant::kNonStationary;
  int horizon_ = 20;
  int hidden_ = 32;
  int scene_channels_ = 0;
  nn::Conv2d embed_;  // Phi: M -> H^0
  nn::ConvLSTMCell cell_;
  nn::Conv2d stationary_;  // first 1x1 layer of the stationary variant
  nn::Conv2d out_;         // hidden -> 5 rewards (or logits)
};

}  // namespace gridplan

#endif  // GRIDPLAN__MDP_HPP_
