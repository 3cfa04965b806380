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
#include "support.hpp"

#include "gridplan/encoders.hpp"
#include "gridplan/ops.hpp"

#include <algorithm>
#include <stdexcept>

using namespace gridplan;
using ag::Tensor;

namespace
{

ScenarioObservation walking_agent(int tp = 8)
{
  ScenarioObservation obs;
  for (int t = 0; t < tp; ++t) obs.history.push_back({100.0 + 3.0 * t, 50.0 - 0.5 * t});
  NeighborTrack nb;
  nb.agent_id = 7;
  for (int t = 0; t < tp; ++t) {
    nb.positions.push_back({130.0 + 2.0 * t, 40.0 + 1.0 * t});
    nb.valid.push_back(t > 0);
  }
  obs.neighbors.push_back(nb);
  return obs;
}

void zero_all(nn::NamedParams params)
{
  for (auto & [name, t] : params) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
}

}  // namespace

TEST_SUITE("encoders")
{
TEST_CASE("pooling grid placement")
{
  const PoolingSpec spec;
  CHECK(spec.size() == 72);
  const std::vector<NeighborState> none;
  for (double v : pooling_grid({0.0, 0.0}, {1.0, 2.0}, none, spec)) CHECK(v == 0.0);

  // cell (2, 3) spans x in [-33.3, 0), y in [0, 33.3)
  const std::vector<NeighborState> comoving{{{-10.0, 10.0}, {1.0, 2.0}}};
  for (double v : pooling_grid({0.0, 0.0}, {1.0, 2.0}, comoving, spec)) CHECK(v == 0.0);

  // cell (4, 1) spans x in [33.3, 66.7), y in [-66.7, -33.3)
  const std::vector<NeighborState> one{{{55.0, -45.0}, {2.5, 1.5}}};
  const auto d = pooling_grid({5.0, 5.0}, {1.0, 2.0}, one, spec);
  const int slot = 2 * (1 * 6 + 4);
  for (int i = 0; i < 72; ++i) {
    if (i == slot) CHECK(d[i] == 1.5);
    else if (i == slot + 1) CHECK(d[i] == -0.5);
    else CHECK(d[i] == 0.0);
  }
}

TEST_CASE("pooling grid: nearest neighbor wins and far neighbors are dropped")
{
  const PoolingSpec spec;
  const std::vector<NeighborState> two{{{60.0, -60.0}, {9.0, 9.0}}, {{40.0, -40.0}, {1.0, 1.0}}, {{500.0, 0.0}, {3.0, 3.0}}};
  auto d = pooling_grid({0.0, 0.0}, {0.0, 0.0}, two, spec);
  const int slot = 2 * (1 * 6 + 4);
  CHECK(d[slot] == 1.0);
  std::vector<NeighborState> swapped{two[1], two[0], two[2]};
  CHECK(pooling_grid({0.0, 0.0}, {0.0, 0.0}, swapped, spec) == d);
  double total = 0.0;
  for (double v : d) total += std::abs(v);
  CHECK(total == 2.0);
}

TEST_CASE("pooling grid from a scenario uses validity flags")
{
  const ScenarioObservation obs = walking_agent();
  const PoolingSpec spec;
  // neighbor at t=1 is valid but its previous point is not: velocity taken as zero
  const auto d1 = pooling_grid(obs, 1, spec);
  const auto d3 = pooling_grid(obs, 3, spec);
  double s1 = 0.0, s3 = 0.0;
  for (double v : d1) s1 += v;
  for (double v : d3) s3 += v;
  CHECK(s1 == doctest::Approx(-3.0 + 0.5));
  CHECK(s3 == doctest::Approx((2.0 - 3.0) + (1.0 + 0.5)));
  CHECK_THROWS_AS(pooling_grid(obs, 0, spec), std::out_of_range);
}

TEST_CASE("motion feature shape, coordinate channels and zero parameters")
{
  nn::Rng rng(31);
  MotionEncoder enc(PoolingSpec{}, 64, rng);
  const ScenarioObservation obs = walking_agent();
  const GridSpec spec = obs.grid(25, 200.0);
  const MotionFeature m = enc(obs, spec);
  CHECK(m.m0.shape() == ag::Shape{1, 64});
  CHECK(m.map.shape() == ag::Shape{66, 25, 25});
  for (int iy = 0; iy < 25; ++iy) {
    for (int ix = 0; ix < 25; ++ix) {
      const Vec2 w = grid_to_world({double(ix), double(iy)}, spec) - spec.origin;
      CHECK(m.map[(64 * 25 + iy) * 25 + ix] == doctest::Approx(w.x).epsilon(1e-12));
      CHECK(m.map[(65 * 25 + iy) * 25 + ix] == doctest::Approx(w.y).epsilon(1e-12));
    }
  }
  const MotionFeature again = enc(obs, spec);
  for (std::size_t i = 0; i < m.map.size(); ++i) CHECK(m.map[i] == again.map[i]);
  const Tensor e = m.embedding_input(200.0);
  CHECK(e[(64 * 25 + 0) * 25 + 0] == doctest::Approx(-0.96));

  zero_all(nn::named_parameters(enc));
  const MotionFeature z = enc(obs, spec);
  for (double v : z.m0.data()) CHECK(v == 0.0);
  for (int i = 0; i < 64 * 625; ++i) CHECK(z.map[i] == 0.0);

  ScenarioObservation short_obs;
  short_obs.history = {{0.0, 0.0}};
  CHECK_THROWS_AS(enc(short_obs, spec), std::invalid_argument);
}

TEST_CASE("scene encoder shapes, zero propagation and size checks")
{
  nn::Rng rng(32);
  SceneEncoder enc(3, 200, 25, {8, 16}, 32, rng);
  SceneRaster raster;
  raster.size = 200;
  raster.pixels.assign(3 * 200 * 200, 0);
  const Tensor f = enc(raster.tensor());
  CHECK(f.shape() == ag::Shape{32, 25, 25});
  for (auto & [name, t] : nn::named_parameters(enc)) {
    if (name.ends_with("bias")) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
  }
  const Tensor zero = enc(raster.tensor());
  for (double v : zero.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(enc(Tensor::zeros({3, 100, 100})), std::invalid_argument);
  CHECK_THROWS_AS(SceneEncoder(3, 150, 25, {8, 8}, 8, rng), std::invalid_argument);
  SceneEncoder half(3, 100, 25, {4, 4}, 8, rng);
  CHECK(half(Tensor::zeros({3, 100, 100})).shape() == ag::Shape{8, 25, 25});
}

TEST_CASE("encoder gradients w.r.t. raster and history match finite differences")
{
  nn::Rng rng(33);
  SceneEncoder scene(3, 4, 2, {3, 3}, 2, rng);
  Tensor raster = testing::random_leaf({3, 4, 4}, rng, 0.0, 1.0);
  CHECK(testing::gradcheck([&] { return testing::project(scene(raster)); }, {raster}).rel_error < 1e-4);

  MotionEncoder motion(PoolingSpec{2, 200.0}, 5, rng);
  const GridSpec spec{3, 30.0, {}};
  Tensor rows = testing::random_leaf({4, 10}, rng);
  CHECK(testing::gradcheck([&] { return testing::project(motion.encode(rows, spec).map); }, {rows}).rel_error < 1e-4);
}
}
