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

#ifndef GRIDPLAN__OBJECTIVES_HPP_
#define GRIDPLAN__OBJECTIVES_HPP_

#include "gridplan/autograd.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/mdp.hpp"

#include <span>
#include <vector>

namespace gridplan
{

using Trajectory = std::vector<Vec2>;

/// Loss terms of one evaluation; sce = forward_ce + beta * reverse_ce.
struct LossReport
{
  double forward_ce = 0.0;
  double reverse_ce = 0.0;
  double sce = 0.0;
  double variety = 0.0;
  double beta = 0.0;

  static LossReport make(double forward, double reverse, double beta, double variety = 0.0)
  {
    return {forward, reverse, forward + beta * reverse, variety, beta};
  }
};

/**
 * @brief Forward cross-entropy of one observed future.
 *
 * -log q(S|Omega) - log q(Y|Omega,S): the clipped plan log-likelihood of the
 * rasterized plan under log_pi plus the teacher-forced Gaussian NLL ([B] rows,
 * averaged).
 */
ag::Tensor forward_ce(
  const Plan & gt_plan, const ag::Tensor & log_pi, const GridMDP & mdp, const ag::Tensor & rollout_nll,
  double clip_eps = 1e-12);

/**
 * @brief Reverse cross-entropy of sampled trajectories under the OGMs.
 *
 * positions[t] holds [M, 2] world-frame samples; returns the mean over the M
 * rows of -sum_t log(O_t(Y_t) + eps).
 */
ag::Tensor reverse_ce(
  const std::vector<ag::Tensor> & maps, const std::vector<ag::Tensor> & positions,
  const GridSpec & spec, double eps = 1e-12);

/**
 * @brief Variety (minimum-over-K) loss.
 *
 * gt is [2 * t_f] (or any shape with that many values), reps is [K, 2 * t_f];
 * returns min_k ||gt - reps_k||_2.
 */
ag::Tensor variety_loss(const ag::Tensor & gt, const ag::Tensor & reps);
double variety_loss(const Trajectory & gt, const std::vector<Trajectory> & reps);

/// Displacement metrics of K predictions against one ground truth.
struct DisplacementMetrics
{
  double min_ade = 0.0;
  double min_fde = 0.0;
  double avg_fde = 0.0;
  double rf = 1.0;
};

inline constexpr double kRfEpsilon = 1e-9;

/// minADE_K, minFDE_K, avgFDE_K and RF_K = avgFDE / max(minFDE, 1e-9) (1 when all FDEs are 0).
DisplacementMetrics min_ade_fde(const Trajectory & gt, const std::vector<Trajectory> & preds);

/**
 * @brief Pooled offroad-rate accumulator.
 *
 * Only steps whose ground-truth point is on road qualify; each of the K
 * predicted points at such a step counts towards the denominator. Scenarios
 * without any qualifying step are excluded and counted.
 */
class OffroadCounter
{
public:
  /// `road` is a single-channel {0,1} field; on-road means mask > 0.5 at the nearest cell.
  void add(const std::vector<Trajectory> & preds, const Trajectory & gt, const GridField & road);

  double rate() const { return qualifying_ ? static_cast<double>(offroad_) / qualifying_ : 0.0; }
  long qualifying() const { return qualifying_; }
  long offroad() const { return offroad_; }
  long excluded() const { return excluded_; }
  long scenarios() const { return scenarios_; }

private:
  long qualifying_ = 0;
  long offroad_ = 0;
  long excluded_ = 0;
  long scenarios_ = 0;
};

bool on_road(const GridField & road, Vec2 p);

/// Flattens a trajectory to [x0, y0, x1, y1, ...].
std::vector<double> flatten(const Trajectory & t);
Trajectory unflatten(std::span<const double> v);

}  // namespace gridplan

#endif  // GRIDPLAN__OBJECTIVES_HPP_
