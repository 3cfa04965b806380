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
#include "gridplan/model.hpp"
#include "gridplan/ogm.hpp"
#include "gridplan/ops.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gridplan;
using ag::Tensor;

namespace
{

Tensor uniform(const ag::Shape & shape, nn::Rng & rng, bool grad = false)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(ag::numel(shape));
  for (double & x : v) x = u(rng);
  return Tensor::from(std::move(v), shape, grad);
}

void BM_ValueIteration(benchmark::State & state)
{
  const int g = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1));
  nn::Rng rng(1);
  const GridMDP mdp{GridSpec{g, 8.0 * g, {}}, n};
  const Tensor r = uniform({n, g * g, kNumActions}, rng);
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(value_iteration(r, mdp).log_pi.data().data());
}
BENCHMARK(BM_ValueIteration)->Args({9, 10})->Args({25, 20})->Unit(benchmark::kMicrosecond);

void BM_ValueIterationBackward(benchmark::State & state)
{
  const int g = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1));
  nn::Rng rng(2);
  const GridMDP mdp{GridSpec{g, 8.0 * g, {}}, n};
  Tensor r = uniform({n, g * g, kNumActions}, rng, true);
  for (auto _ : state) {
    r.zero_grad();
    ag::sum(value_iteration(r, mdp).log_pi).backward();
    benchmark::DoNotOptimize(r.grad().data());
  }
}
BENCHMARK(BM_ValueIterationBackward)->Args({25, 20})->Unit(benchmark::kMillisecond);

void BM_OGMRollout(benchmark::State & state)
{
  nn::Rng rng(3);
  OGMConfig oc;
  oc.variant = state.range(0) == 0 ? OGMVariant::kDeconv : OGMVariant::kConvLSTMDirect;
  OGMDecoder dec(oc, rng);
  const Tensor scene = uniform({oc.scene_channels, oc.grid_size, oc.grid_size}, rng);
  const Tensor motion = uniform({oc.motion_channels, oc.grid_size, oc.grid_size}, rng);
  const GridSpec spec{oc.grid_size, 200.0, {}};
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(dec(scene, motion, 12, spec).maps.back().data().data());
  state.SetLabel(to_string(oc.variant));
}
BENCHMARK(BM_OGMRollout)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SamplePlans(benchmark::State & state)
{
  const int c = static_cast<int>(state.range(0));
  nn::Rng rng(4);
  const GridMDP mdp{GridSpec{25, 200.0, {}}, 20};
  const Tensor r = uniform({20, 625, kNumActions}, rng);
  ag::NoGradGuard guard;
  const std::vector<Tensor> fields = policy_fields(value_iteration(r, mdp).log_pi, 25);
  const Tensor start = center_states(mdp.spec, c);
  for (auto _ : state) benchmark::DoNotOptimize(sample_plan(fields, start, 1.0, rng).states.back().data().data());
}
BENCHMARK(BM_SamplePlans)->Arg(20)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
