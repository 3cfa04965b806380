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

#include "gridplan/mdp.hpp"

#include "gridplan/log.hpp"
#include "gridplan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gridplan
{

using ag::Tensor;

const char * action_name(int action)
{
  switch (action) {
    case kUp: return "up";
    case kDown: return "down";
    case kLeft: return "left";
    case kRight: return "right";
    case kEnd: return "end";
    case kAbsorbed: return "stay";
    default: return "?";
  }
}

int GridMDP::transition(int cell, int action) const
{
  if (cell == absorbing() || action == kEnd) return absorbing();
  const int g = spec.grid_size;
  const int ix = cell % g + kActionDelta[static_cast<std::size_t>(action)][0];
  const int iy = cell / g + kActionDelta[static_cast<std::size_t>(action)][1];
  if (ix < 0 || ix >= g || iy < 0 || iy >= g) return cell;
  return cell_index(ix, iy);
}

std::vector<int> GridMDP::transition_table() const
{
  std::vector<int> table(static_cast<std::size_t>(cells()) * kNumActions);
  for (int s = 0; s < cells(); ++s) {
    for (int a = 0; a < kNumActions; ++a) table[static_cast<std::size_t>(s) * kNumActions + a] = transition(s, a);
  }
  return table;
}

PolicyTensors value_iteration(const Tensor & rewards, const GridMDP & mdp)
{
  const int s_count = mdp.cells();
  if (rewards.rank() != 3 || rewards.dim(1) != s_count || rewards.dim(2) != kNumActions) {
    throw std::invalid_argument(
      "value_iteration: rewards must be [N, " + std::to_string(s_count) + ", 5], got " +
      ag::shape_str(rewards.shape()));
  }
  for (double r : rewards.data()) {
    if (!std::isfinite(r)) throw std::domain_error("value_iteration: non-finite reward");
  }
  const int horizon = rewards.dim(0);
  const std::vector<int> next = mdp.transition_table();
  const Tensor sink = Tensor::zeros({1});

  // values_rev[k] holds V^{N-k}
  std::vector<Tensor> values_rev{Tensor::zeros({s_count})};
  std::vector<Tensor> log_pi_rev;
  Tensor v_ext = Tensor::zeros({s_count + 1});
  for (int n = horizon; n >= 1; --n) {
    const Tensor r_n = ag::reshape(ag::slice(rewards, 0, n - 1, n), {s_count, kNumActions});
    const Tensor q = ag::add(r_n, ag::gather(v_ext, next, {s_count, kNumActions}));
    const Tensor v_prev = ag::logsumexp(q, 1);
    log_pi_rev.push_back(ag::log_softmax(q, 1));
    values_rev.push_back(v_prev);
    v_ext = ag::concat({v_prev, sink}, 0);
  }
  std::reverse(values_rev.begin(), values_rev.end());
  std::reverse(log_pi_rev.begin(), log_pi_rev.end());
  return {ag::stack(log_pi_rev, 0), ag::stack(values_rev, 0)};
}

double NonStationaryPolicy::prob(int n, int cell, int action) const
{
  return pi[(static_cast<std::size_t>(n - 1) * cells + cell) * kNumActions + action];
}

NonStationaryPolicy to_policy(const PolicyTensors & tensors)
{
  NonStationaryPolicy p;
  p.horizon = tensors.log_pi.dim(0);
  p.cells = tensors.log_pi.dim(1);
  p.pi.reserve(tensors.log_pi.size());
  for (double lp : tensors.log_pi.data()) p.pi.push_back(std::exp(lp));
  if (tensors.values.defined()) {
    p.values.assign(tensors.values.data().begin(), tensors.values.data().end());
  }
  return p;
}

int Plan::moves() const
{
  int m = 0;
  for (int a : actions) {
    if (a == kEnd || a == kAbsorbed) break;
    ++m;
  }
  return m;
}

Plan extract_gt_plan(std::span<const Vec2> future, const GridMDP & mdp)
{
  if (future.empty()) throw std::invalid_argument("extract_gt_plan: empty trajectory");
  const int horizon = mdp.horizon;
  const auto start = nearest_cell(mdp.spec.origin, mdp.spec);
  std::array<int, 2> cur = start;
  std::vector<int> moves;
  for (const Vec2 & p : future) {
    const auto target = nearest_cell(p, mdp.spec);
    while (cur[0] != target[0]) {
      const bool right = target[0] > cur[0];
      moves.push_back(right ? kRight : kLeft);
      cur[0] += right ? 1 : -1;
    }
    while (cur[1] != target[1]) {
      const bool up = target[1] > cur[1];
      moves.push_back(up ? kUp : kDown);
      cur[1] += up ? 1 : -1;
    }
  }
  if (static_cast<int>(moves.size()) > horizon) {
    log::warn(
      "extract_gt_plan: trajectory needs " + std::to_string(moves.size()) +
      " moves, truncating to horizon " + std::to_string(horizon));
    moves.resize(static_cast<std::size_t>(horizon));
  }

  Plan plan;
  plan.actions = moves;
  if (static_cast<int>(plan.actions.size()) < horizon) plan.actions.push_back(kEnd);
  plan.actions.resize(static_cast<std::size_t>(horizon), kAbsorbed);

  std::array<int, 2> s = start;
  for (int n = 0; n < horizon; ++n) {
    plan.states.push_back({static_cast<double>(s[0]), static_cast<double>(s[1])});
    const int a = plan.actions[static_cast<std::size_t>(n)];
    if (a >= 0 && a < kEnd) {
      s[0] += kActionDelta[static_cast<std::size_t>(a)][0];
      s[1] += kActionDelta[static_cast<std::size_t>(a)][1];
    }
  }
  return plan;
}

namespace
{

int plan_cell(const Plan & plan, int n, int grid_size)
{
  const Vec2 s = plan.states[static_cast<std::size_t>(n)];
  const int ix = static_cast<int>(std::lround(s.x));
  const int iy = static_cast<int>(std::lround(s.y));
  if (ix < 0 || ix >= grid_size || iy < 0 || iy >= grid_size) {
    throw std::out_of_range("plan state outside the grid");
  }
  return iy * grid_size + ix;
}

}  // namespace

double plan_log_likelihood(const Plan & plan, const NonStationaryPolicy & policy)
{
  if (plan.horizon() != policy.horizon || plan.actions.size() != plan.states.size()) {
    throw std::invalid_argument("plan_log_likelihood: plan and policy horizons differ");
  }
  const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(policy.cells))));
  double total = 0.0;
  for (int n = 0; n < plan.horizon(); ++n) {
    const int a = plan.actions[static_cast<std::size_t>(n)];
    if (a == kAbsorbed) continue;
    const double p = policy.prob(n + 1, plan_cell(plan, n, g), a);
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(p);
  }
  return total;
}

Tensor plan_log_likelihood(
  const Plan & plan, const Tensor & log_pi, const GridMDP & mdp, double clip_eps)
{
  if (log_pi.rank() != 3 || plan.horizon() != log_pi.dim(0) ||
      plan.actions.size() != plan.states.size()) {
    throw std::invalid_argument("plan_log_likelihood: plan and policy horizons differ");
  }
  std::vector<int> idx;
  for (int n = 0; n < plan.horizon(); ++n) {
    const int a = plan.actions[static_cast<std::size_t>(n)];
    if (a == kAbsorbed) continue;
    const int cell = plan_cell(plan, n, mdp.spec.grid_size);
    idx.push_back((n * mdp.cells() + cell) * kNumActions + a);
  }
  if (idx.empty()) return Tensor::scalar(0.0);
  const int count = static_cast<int>(idx.size());
  const Tensor steps = ag::gather(log_pi, std::move(idx), {count});
  return ag::sum(ag::clamp(steps, std::log(clip_eps), 0.0));
}

std::vector<Tensor> policy_fields(const Tensor & log_pi, int grid_size)
{
  const int horizon = log_pi.dim(0);
  const int cells = log_pi.dim(1);
  const Tensor pi = ag::exp(log_pi);
  std::vector<Tensor> fields;
  fields.reserve(static_cast<std::size_t>(horizon));
  for (int n = 0; n < horizon; ++n) {
    const Tensor step = ag::reshape(ag::slice(pi, 0, n, n + 1), {cells, kNumActions});
    fields.push_back(ag::reshape(ag::transpose(step), {kNumActions, grid_size, grid_size}));
  }
  return fields;
}

std::vector<double> gumbel_noise(std::size_t count, nn::Rng & rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> g(count);
  for (double & v : g) {
    double x = u(rng);
    while (x <= 0.0) x = u(rng);
    v = -std::log(-std::log(x));
  }
  return g;
}

Tensor gumbel_softmax(const Tensor & logits, std::span<const double> noise, double tau)
{
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax: temperature must be positive");
  if (noise.size() != logits.size()) throw std::invalid_argument("gumbel_softmax: noise size");
  const Tensor g = Tensor::from(std::vector<double>(noise.begin(), noise.end()), logits.shape());
  return ag::softmax(ag::mul_scalar(ag::add(logits, g), 1.0 / tau), -1);
}

Plan SoftPlan::row(int b) const
{
  Plan p;
  for (std::size_t n = 0; n < states.size(); ++n) {
    const auto s = states[n].data();
    p.states.push_back({s[2 * b], s[2 * b + 1]});
    const auto a = actions[n].data();
    std::array<double, kNumActions> soft{};
    for (int k = 0; k < kNumActions; ++k) soft[static_cast<std::size_t>(k)] = a[b * kNumActions + k];
    p.soft_actions.push_back(soft);
  }
  return p;
}

SoftPlan sample_plan(
  const std::vector<Tensor> & fields, const Tensor & start, double tau,
  std::span<const double> noise, double eps)
{
  if (!(tau > 0.0)) throw std::invalid_argument("sample_plan: temperature must be positive");
  if (fields.empty()) throw std::invalid_argument("sample_plan: empty policy");
  const int horizon = static_cast<int>(fields.size());
  const int batch = start.dim(0);
  const std::size_t per_step = static_cast<std::size_t>(batch) * kNumActions;
  if (noise.size() != per_step * horizon) {
    throw std::invalid_argument("sample_plan: expected N*B*5 Gumbel values");
  }
  const int g = fields.front().dim(1);
  std::vector<double> delta;
  for (const auto & d : kActionDelta) {
    delta.push_back(d[0]);
    delta.push_back(d[1]);
  }
  const Tensor displacement = Tensor::from(std::move(delta), {kNumActions, 2});

  SoftPlan plan;
  Tensor state = start;
  for (int n = 0; n < horizon; ++n) {
    plan.states.push_back(state);
    Tensor p = ag::bilinear_sample(fields[static_cast<std::size_t>(n)], state);
    p = ag::div(p, ag::sum_axis(p, 1, true));
    const Tensor logits = ag::log(ag::add_scalar(p, eps));
    const Tensor y = gumbel_softmax(logits, noise.subspan(n * per_step, per_step), tau);
    plan.actions.push_back(y);
    state = ag::clamp(ag::add(state, ag::matmul(y, displacement)), 0.0, g - 1.0);
  }
  return plan;
}

SoftPlan sample_plan(
  const std::vector<Tensor> & fields, const Tensor & start, double tau, nn::Rng & rng)
{
  const auto noise = gumbel_noise(fields.size() * start.dim(0) * kNumActions, rng);
  return sample_plan(fields, start, tau, noise);
}

std::vector<Tensor> plan_state_tensors(const Plan & plan)
{
  std::vector<Tensor> out;
  out.reserve(plan.states.size());
  for (const Vec2 & s : plan.states) out.push_back(Tensor::from({s.x, s.y}, {1, 2}));
  return out;
}

RewardVariant parse_reward_variant(const std::string & name)
{
  if (name == "nonstationary") return RewardVariant::kNonStationary;
  if (name == "stationary" || name == "sr") return RewardVariant::kStationary;
  if (name == "bc") return RewardVariant::kBehaviorCloning;
  throw std::invalid_argument("unknown reward variant '" + name + "'");
}

std::string to_string(RewardVariant v)
{
  switch (v) {
    case RewardVariant::kNonStationary: return "nonstationary";
    case RewardVariant::kStationary: return "stationary";
    case RewardVariant::kBehaviorCloning: return "bc";
  }
  return "?";
}

PolicyNetwork::PolicyNetwork(
  int scene_channels, int motion_channels, int hidden, int horizon, RewardVariant variant,
  nn::Rng & rng)
: variant_(variant), horizon_(horizon), hidden_(hidden), scene_channels_(scene_channels)
{
  embed_ = nn::Conv2d(motion_channels, hidden, 1, 1, 0, rng);
  if (variant == RewardVariant::kStationary) {
    stationary_ = nn::Conv2d(scene_channels + hidden, hidden, 1, 1, 0, rng);
  } else {
    cell_ = nn::ConvLSTMCell(scene_channels, hidden, 3, rng);
  }
  out_ = nn::Conv2d(hidden, kNumActions, 1, 1, 0, rng);
}

RewardStack PolicyNetwork::reward_head(const Tensor & scene, const Tensor & motion) const
{
  if (scene.rank() != 3 || scene.dim(0) != scene_channels_ || motion.rank() != 3 ||
      scene.dim(1) != motion.dim(1) || scene.dim(2) != motion.dim(2)) {
    throw std::invalid_argument(
      "reward_head: incompatible feature maps " + ag::shape_str(scene.shape()) + " and " +
      ag::shape_str(motion.shape()));
  }
  const int g = scene.dim(1);
  const int cells = g * g;
  const Tensor h0 = embed_(motion);
  RewardStack out;
  std::vector<Tensor> per_step;
  auto to_rows = [cells](const Tensor & r) {
    return ag::transpose(ag::reshape(r, {kNumActions, cells}));
  };
  if (variant_ == RewardVariant::kStationary) {
    const Tensor h = ag::relu(stationary_(ag::concat({scene, h0}, 0)));
    const Tensor r = to_rows(out_(h));
    for (int n = 0; n < horizon_; ++n) {
      per_step.push_back(r);
      out.hidden.push_back(h);
    }
  } else {
    const Tensor x_gates = cell_.input_gates(scene);
    nn::ConvLSTMState state{h0, Tensor::zeros({hidden_, g, g})};
    for (int n = 0; n < horizon_; ++n) {
      state = cell_.step(x_gates, state);
      per_step.push_back(to_rows(out_(state.h)));
      out.hidden.push_back(state.h);
    }
  }
  out.rewards = ag::stack(per_step, 0);
  return out;
}

PolicyTensors PolicyNetwork::policy(const RewardStack & rewards, const GridMDP & mdp) const
{
  if (variant_ == RewardVariant::kBehaviorCloning) {
    for (double r : rewards.rewards.data()) {
      if (!std::isfinite(r)) throw std::domain_error("policy: non-finite logits");
    }
    return {ag::log_softmax(rewards.rewards, 2), Tensor()};
  }
  return value_iteration(rewards.rewards, mdp);
}

void PolicyNetwork::visit(const nn::ParamVisitor & f, const std::string & prefix)
{
  embed_.visit(f, prefix + "embed.");
  if (variant_ == RewardVariant::kStationary) {
    stationary_.visit(f, prefix + "stationary.");
  } else {
    cell_.visit(f, prefix + "cell.");
  }
  out_.visit(f, prefix + "out.");
}

}  // namespace gridplan
