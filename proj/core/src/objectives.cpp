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

#include "gridplan/objectives.hpp"

#include "gridplan/ogm.hpp"
#include "gridplan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gridplan
{

using ag::Tensor;

Tensor forward_ce(
  const Plan & gt_plan, const Tensor & log_pi, const GridMDP & mdp, const Tensor & rollout_nll,
  double clip_eps)
{
  const Tensor plan_ll = plan_log_likelihood(gt_plan, log_pi, mdp, clip_eps);
  return ag::sub(ag::mean(rollout_nll), plan_ll);
}

Tensor reverse_ce(
  const std::vector<Tensor> & maps, const std::vector<Tensor> & positions, const GridSpec & spec,
  double eps)
{
  std::vector<Tensor> grid;
  grid.reserve(positions.size());
  for (const Tensor & p : positions) grid.push_back(world_to_grid(p, spec));
  return ag::neg(ag::mean(ogm_log_likelihood(maps, grid, eps)));
}

Tensor variety_loss(const Tensor & gt, const Tensor & reps)
{
  if (reps.rank() != 2 || static_cast<std::size_t>(reps.dim(1)) != gt.size() || reps.dim(0) < 1) {
    throw std::invalid_argument(
      "variety_loss: representatives " + ag::shape_str(reps.shape()) + " do not match ground truth " +
      ag::shape_str(gt.shape()));
  }
  const Tensor diff = ag::sub(reps, ag::reshape(gt, {1, reps.dim(1)}));
  const Tensor sq = ag::sum_axis(ag::square(diff), 1);
  return ag::sqrt(ag::add_scalar(ag::min_all(sq), 1e-24));
}

double variety_loss(const Trajectory & gt, const std::vector<Trajectory> & reps)
{
  if (reps.empty()) throw std::invalid_argument("variety_loss: no representatives");
  double best = std::numeric_limits<double>::infinity();
  for (const Trajectory & r : reps) {
    if (r.size() != gt.size()) throw std::invalid_argument("variety_loss: length mismatch");
    double s = 0.0;
    for (std::size_t t = 0; t < gt.size(); ++t) {
      const Vec2 d = r[t] - gt[t];
      s += d.x * d.x + d.y * d.y;
    }
    best = std::min(best, s);
  }
  return std::sqrt(best);
}

DisplacementMetrics min_ade_fde(const Trajectory & gt, const std::vector<Trajectory> & preds)
{
  if (preds.empty() || gt.empty()) throw std::invalid_argument("min_ade_fde: empty input");
  DisplacementMetrics m;
  m.min_ade = std::numeric_limits<double>::infinity();
  m.min_fde = std::numeric_limits<double>::infinity();
  double fde_sum = 0.0;
  for (const Trajectory & p : preds) {
    if (p.size() != gt.size()) throw std::invalid_argument("min_ade_fde: length mismatch");
    double ade = 0.0;
    for (std::size_t t = 0; t < gt.size(); ++t) ade += norm(p[t] - gt[t]);
    ade /= static_cast<double>(gt.size());
    const double fde = norm(p.back() - gt.back());
    m.min_ade = std::min(m.min_ade, ade);
    m.min_fde = std::min(m.min_fde, fde);
    fde_sum += fde;
  }
  m.avg_fde = fde_sum / static_cast<double>(preds.size());
  m.rf = m.avg_fde == 0.0 ? 1.0 : m.avg_fde / std::max(m.min_fde, kRfEpsilon);
  return m;
}

bool on_road(const GridField & road, Vec2 p)
{
  const auto c = nearest_cell(p, road.spec);
  return road.at(0, c[0], c[1]) > 0.5;
}

void OffroadCounter::add(const std::vector<Trajectory> & preds, const Trajectory & gt, const GridField & road)
{
  ++scenarios_;
  long q = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (!on_road(road, gt[t])) continue;
    for (const Trajectory & p : preds) {
      ++q;
      if (!on_road(road, p.at(t))) ++offroad_;
    }
  }
  if (q == 0) ++excluded_;
  qualifying_ += q;
}

std::vector<double> flatten(const Trajectory & t)
{
  std::vector<double> v;
  v.reserve(2 * t.size());
  for (const Vec2 & p : t) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return v;
}

Trajectory unflatten(std::span<const double> v)
{
  Trajectory t;
  for (std::size_t i = 0; i + 1 < v.size(); i += 2) t.push_back({v[i], v[i + 1]});
  return t;
}

}  // namespace gridplan
