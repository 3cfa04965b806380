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

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

#include "gridplan/mdp.hpp"
#include "gridplan/ops.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace gridplan;
using ag::Tensor;

namespace
{

GridMDP make_mdp(int g, int horizon)
{
  return GridMDP{GridSpec{g, 10.0 * g, {}}, horizon};
}

Tensor random_rewards(int horizon, int cells, nn::Rng & rng, double scale = 1.0)
{
  return testing::random_leaf({horizon, cells, kNumActions}, rng, -scale, scale);
}

Plan plan_from_actions(const std::vector<int> & actions, int start, const GridMDP & mdp)
{
  Plan p;
  int cell = start;
  int last = start;
  const int g = mdp.spec.grid_size;
  for (int a : actions) {
    const int shown = cell == mdp.absorbing() ? last : cell;
    p.states.push_back({static_cast<double>(shown % g), static_cast<double>(shown / g)});
    p.actions.push_back(cell == mdp.absorbing() ? kAbsorbed : a);
    if (cell != mdp.absorbing()) last = cell;
    if (cell != mdp.absorbing()) cell = mdp.transition(cell, a);
  }
  return p;
}

}  // namespace

TEST_SUITE("mdp")
{
TEST_CASE("zero rewards on a single cell give a uniform policy")
{
  const GridMDP mdp = make_mdp(1, 1);
  const auto pol = to_policy(value_iteration(Tensor::zeros({1, 1, 5}), mdp));
  for (int a = 0; a < 5; ++a) CHECK(pol.prob(1, 0, a) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(pol.value(0, 0) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(pol.value(1, 0) == 0.0);
}

TEST_CASE("a heavily penalized action gets vanishing probability")
{
  const GridMDP mdp = make_mdp(2, 2);
  Tensor r = Tensor::zeros({2, 4, 5});
  r.mutable_data()[(0 * 4 + 0) * 5 + kRight] = -1e9;
  const auto pol = to_policy(value_iteration(r, mdp));
  CHECK(pol.prob(1, 0, kRight) < 1e-300);
}

TEST_CASE("transitions keep off-grid moves in place and end in the sink")
{
  const GridMDP mdp = make_mdp(3, 2);
  CHECK(mdp.transition(0, kLeft) == 0);
  CHECK(mdp.transition(0, kDown) == 0);
  CHECK(mdp.transition(0, kRight) == 1);
  CHECK(mdp.transition(0, kUp) == 3);
  CHECK(mdp.transition(4, kEnd) == mdp.absorbing());
  CHECK(mdp.transition(mdp.absorbing(), kUp) == mdp.absorbing());
}

TEST_CASE("right-rewarding 2x2 MDP matches enumeration from (0,0)")
{
  const GridMDP mdp = make_mdp(2, 2);
  Tensor r = Tensor::zeros({2, 4, 5});
  for (int n = 0; n < 2; ++n) {
    for (int s = 0; s < 4; ++s) r.mutable_data()[(n * 4 + s) * 5 + kRight] = 1.0;
  }
  const auto pol = to_policy(value_iteration(r, mdp));
  const auto plans = testing::enumerate_plans(2, 2, 0, [](int, int, int a) { return a == 3 ? 1.0 : 0.0; });
  CHECK(plans.size() == 21);  // 4 moves x 5 + end
  const double log_z = testing::log_partition(plans);
  CHECK(pol.value(0, 0) == doctest::Approx(log_z).epsilon(1e-13));
  for (const auto & p : plans) {
    double prob = 1.0;
    for (int n = 0; n < 2; ++n) {
      if (p.actions[n] < 0) break;
      prob *= pol.prob(n + 1, p.cells[n], p.actions[n]);
    }
    CHECK(std::abs(prob - std::exp(p.total_reward - log_z)) < 1e-12);
  }
}

TEST_CASE("MaxEnt identity holds for random reward stacks")
{
  nn::Rng rng(21);
  for (int g : {2, 3}) {
    for (int horizon : {2, 3}) {
      const GridMDP mdp = make_mdp(g, horizon);
      const Tensor r = random_rewards(horizon, g * g, rng, 2.0);
      const auto pol = to_policy(value_iteration(r, mdp));
      auto rf = [&](int n, int s, int a) { return r[((n - 1) * g * g + s) * 5 + a]; };
      for (int start = 0; start < g * g; ++start) {
        const auto plans = testing::enumerate_plans(g, horizon, start, rf);
        const double log_z = testing::log_partition(plans);
        CHECK(pol.value(0, start) == doctest::Approx(log_z).epsilon(1e-12));
        double err = 0.0, total = 0.0;
        for (const auto & p : plans) {
          double prob = 1.0;
          for (int n = 0; n < horizon && p.actions[n] >= 0; ++n) prob *= pol.prob(n + 1, p.cells[n], p.actions[n]);
          err = std::max(err, std::abs(prob - std::exp(p.total_reward - pol.value(0, start))));
          total += prob;
        }
        CHECK(err < 1e-9);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("telescoping identity for random hard plans")
{
  nn::Rng rng(22);
  const GridMDP mdp = make_mdp(4, 6);
  const Tensor r = random_rewards(6, 16, rng, 3.0);
  const auto tensors = value_iteration(r, mdp);
  const auto pol = to_policy(tensors);
  std::uniform_int_distribution<int> act(0, 4), cell(0, 15);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> actions(6);
    for (int & a : actions) a = act(rng);
    const int start = cell(rng);
    const Plan plan = plan_from_actions(actions, start, mdp);
    double reward_sum = 0.0;
    for (int n = 0; n < 6; ++n) {
      const int a = plan.actions[n];
      if (a == kAbsorbed) break;
      const int s = static_cast<int>(plan.states[n].y) * 4 + static_cast<int>(plan.states[n].x);
      reward_sum += r[(n * 16 + s) * 5 + a];
    }
    const double ll = plan_log_likelihood(plan, pol);
    CHECK(std::abs(ll - (reward_sum - pol.value(0, start))) < 1e-9);
    CHECK(plan_log_likelihood(plan, tensors.log_pi, mdp).item() == doctest::Approx(ll).epsilon(1e-12));
  }
}

TEST_CASE("policy rows are normalized, values are finite for large rewards, shift invariance")
{
  nn::Rng rng(23);
  const GridMDP mdp = make_mdp(3, 4);
  const Tensor r = random_rewards(4, 9, rng, 1e4);
  const auto pol = to_policy(value_iteration(r, mdp));
  for (int n = 1; n <= 4; ++n) {
    for (int s = 0; s < 9; ++s) {
      double sum = 0.0;
      for (int a = 0; a < 5; ++a) sum += pol.prob(n, s, a);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  for (double v : pol.values) CHECK(std::isfinite(v));

  // A constant added to one (n, s) row leaves that row's policy unchanged.
  const Tensor small = random_rewards(4, 9, rng, 1.0);
  Tensor bumped = small.detach();
  for (int a = 0; a < 5; ++a) bumped.mutable_data()[(1 * 9 + 4) * 5 + a] += 3.5;
  const auto base = to_policy(value_iteration(small, mdp));
  const auto row = to_policy(value_iteration(bumped, mdp));
  for (int a = 0; a < 5; ++a) CHECK(std::abs(base.prob(2, 4, a) - row.prob(2, 4, a)) < 1e-9);

  // A global shift leaves the last-step policy unchanged (and the whole policy when N = 1).
  const auto shifted = to_policy(value_iteration(ag::add_scalar(small, 3.5), mdp));
  double diff = 0.0;
  for (int s = 0; s < 9; ++s) {
    for (int a = 0; a < 5; ++a) diff = std::max(diff, std::abs(base.prob(4, s, a) - shifted.prob(4, s, a)));
  }
  CHECK(diff < 1e-9);
}

TEST_CASE("value iteration rejects non-finite rewards and bad shapes")
{
  const GridMDP mdp = make_mdp(2, 1);
  Tensor r = Tensor::zeros({1, 4, 5});
  r.mutable_data()[3] = std::nan("");
  CHECK_THROWS_AS(value_iteration(r, mdp), std::domain_error);
  CHECK_THROWS_AS(value_iteration(Tensor::zeros({1, 3, 5}), mdp), std::invalid_argument);
}

TEST_CASE("value iteration and plan likelihood gradients match finite differences")
{
  nn::Rng rng(24);
  const GridMDP mdp = make_mdp(3, 3);
  Tensor r = random_rewards(3, 9, rng);
  auto check = testing::gradcheck(
    [&] {
      const auto t = value_iteration(r, mdp);
      return testing::project(t.log_pi) + testing::project(t.values, 3);
    },
    {r});
  CHECK(check.rel_error < 1e-6);

  const Plan plan = plan_from_actions({kRight, kUp, kEnd}, 0, mdp);
  check = testing::gradcheck([&] { return plan_log_likelihood(plan, value_iteration(r, mdp).log_pi, mdp); }, {r});
  CHECK(check.rel_error < 1e-6);
}

TEST_CASE("ground-truth plan extraction")
{
  const GridMDP mdp{GridSpec{25, 200.0, {0.0, 0.0}}, 6};
  const double c = mdp.spec.cell_size();

  std::vector<Vec2> still(12, Vec2{1.0, -1.0});
  Plan p = extract_gt_plan(still, mdp);
  CHECK(p.actions == std::vector<int>{kEnd, kAbsorbed, kAbsorbed, kAbsorbed, kAbsorbed, kAbsorbed});
  CHECK(p.moves() == 0);

  std::vector<Vec2> forward{{c, 0.0}, {2.0 * c, 0.0}};
  p = extract_gt_plan(forward, mdp);
  CHECK(p.actions == std::vector<int>{kRight, kRight, kEnd, kAbsorbed, kAbsorbed, kAbsorbed});
  CHECK(p.states[0] == Vec2{12.0, 12.0});
  CHECK(p.states[2] == Vec2{14.0, 12.0});
  CHECK(p.states[5] == Vec2{14.0, 12.0});

  std::vector<Vec2> diagonal{{c, c}};
  p = extract_gt_plan(diagonal, mdp);
  CHECK(p.actions[0] == kRight);
  CHECK(p.actions[1] == kUp);
  CHECK(p.actions[2] == kEnd);

  std::vector<Vec2> far{{10.0 * c, 0.0}};
  p = extract_gt_plan(far, mdp);
  CHECK(p.actions == std::vector<int>(6, kRight));

  CHECK_THROWS_AS(extract_gt_plan(std::vector<Vec2>{}, mdp), std::invalid_argument);
}

TEST_CASE("plan log-likelihood hand values")
{
  const GridMDP mdp = make_mdp(3, 4);
  const auto uniform = to_policy(value_iteration(Tensor::zeros({4, 9, 5}), mdp));
  // zero rewards are not a uniform policy at n < N (V differs per state); build one directly
  NonStationaryPolicy flat{4, 9, std::vector<double>(4 * 9 * 5, 0.2), {}};
  const Plan plan = plan_from_actions({kRight, kUp, kEnd, kUp}, 0, mdp);
  CHECK(plan.moves() == 2);
  CHECK(plan_log_likelihood(plan, flat) == doctest::Approx(-3.0 * std::log(5.0)).epsilon(1e-14));
  CHECK(std::isfinite(plan_log_likelihood(plan, uniform)));

  NonStationaryPolicy toy{2, 4, std::vector<double>(2 * 4 * 5, 0.0), {}};
  const GridMDP small = make_mdp(2, 2);
  const Plan two = plan_from_actions({kRight, kUp}, 0, small);
  toy.pi[(0 * 4 + 0) * 5 + kRight] = 0.5;
  toy.pi[(1 * 4 + 1) * 5 + kUp] = 0.25;
  CHECK(plan_log_likelihood(two, toy) == doctest::Approx(std::log(0.125)).epsilon(1e-14));
  toy.pi[(1 * 4 + 1) * 5 + kUp] = 0.0;
  CHECK(plan_log_likelihood(two, toy) == -INFINITY);
}

TEST_CASE("Gumbel-Softmax limits and errors")
{
  nn::Rng rng(25);
  const Tensor logits = Tensor::from({0.3, -1.0, 2.0, 0.0, 0.5}, {1, 5});
  CHECK_THROWS_AS(gumbel_softmax(logits, gumbel_noise(5, rng), 0.0), std::invalid_argument);

  const Tensor hot = gumbel_softmax(logits, gumbel_noise(5, rng), 1e9);
  for (double v : hot.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-6));

  const Tensor right = Tensor::from({0.0, 0.0, 0.0, 10.0, 0.0}, {1, 5});
  int wins = 0;
  for (int i = 0; i < 10000; ++i) {
    const Tensor y = gumbel_softmax(right, gumbel_noise(5, rng), 0.1);
    int best = 0;
    for (int a = 1; a < 5; ++a) if (y[a] > y[best]) best = a;
    wins += best == kRight;
  }
  CHECK(wins > 9900);

  const Tensor flat = Tensor::zeros({1, 5});
  std::vector<double> mean(5, 0.0);
  for (int i = 0; i < 20000; ++i) {
    const Tensor y = gumbel_softmax(flat, gumbel_noise(5, rng), 1.0);
    for (int a = 0; a < 5; ++a) mean[a] += y[a] / 20000.0;
  }
  for (double m : mean) CHECK(m == doctest::Approx(0.2).epsilon(0.02));
}

TEST_CASE("relaxed plan roll-out stays on the grid and on the simplex")
{
  nn::Rng rng(26);
  const GridMDP mdp = make_mdp(5, 6);
  const auto t = value_iteration(random_rewards(6, 25, rng, 2.0), mdp);
  const auto fields = policy_fields(t.log_pi, 5);
  const SoftPlan sp = sample_plan(fields, Tensor::from({2.0, 2.0, 0.0, 4.0, 3.3, 1.2}, {3, 2}), 0.5, rng);
  CHECK(sp.horizon() == 6);
  CHECK(sp.batch() == 3);
  for (int n = 0; n < 6; ++n) {
    for (double s : sp.states[n].data()) CHECK((s >= 0.0 && s <= 4.0));
    for (int b = 0; b < 3; ++b) {
      double sum = 0.0;
      for (int a = 0; a < 5; ++a) sum += sp.actions[n][b * 5 + a];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(sample_plan(fields, Tensor::zeros({1, 2}), -1.0, rng), std::invalid_argument);
}

TEST_CASE("reward head shape, zero output layer and determinism")
{
  nn::Rng rng(27);
  PolicyNetwork net(4, 6, 8, 20, RewardVariant::kNonStationary, rng);
  const Tensor f = testing::random_leaf({4, 25, 25}, rng);
  const Tensor m = testing::random_leaf({6, 25, 25}, rng);
  const RewardStack a = net.reward_head(f, m);
  CHECK(a.rewards.shape() == ag::Shape{20, 625, 5});
  CHECK(a.hidden.size() == 20);
  const RewardStack b = net.reward_head(f, m);
  for (std::size_t i = 0; i < a.rewards.size(); ++i) CHECK(a.rewards[i] == b.rewards[i]);

  for (double & w : net.output_layer().weight.mutable_data()) w = 0.0;
  for (double & w : net.output_layer().bias.mutable_data()) w = 0.0;
  const RewardStack zero = net.reward_head(f, m);
  for (double v : zero.rewards.data()) CHECK(v == 0.0);

  CHECK_THROWS_AS(net.reward_head(testing::random_leaf({3, 25, 25}, rng), m), std::invalid_argument);
}

TEST_CASE("reward variants")
{
  nn::Rng rng(28);
  const GridMDP mdp = make_mdp(5, 4);
  const Tensor f = testing::random_leaf({3, 5, 5}, rng);
  const Tensor m = testing::random_leaf({4, 5, 5}, rng);
  PolicyNetwork sr(3, 4, 6, 4, RewardVariant::kStationary, rng);
  const RewardStack rs = sr.reward_head(f, m);
  for (int n = 1; n < 4; ++n) {
    for (int i = 0; i < 125; ++i) CHECK(rs.rewards[n * 125 + i] == rs.rewards[i]);
  }
  PolicyNetwork bc(3, 4, 6, 4, RewardVariant::kBehaviorCloning, rng);
  const auto pol = to_policy(bc.policy(bc.reward_head(f, m), mdp));
  double sum = 0.0;
  for (int a = 0; a < 5; ++a) sum += pol.prob(2, 7, a);
  CHECK(sum == doctest::Approx(1.0));
  CHECK(parse_reward_variant("sr") == RewardVariant::kStationary);
  CHECK_THROWS_AS(parse_reward_variant("nope"), std::invalid_argument);
}
}
