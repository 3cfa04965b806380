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

#include "gridplan/grid.hpp"
#include "gridplan/ops.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

using namespace gridplan;

TEST_SUITE("grid")
{
TEST_CASE("world_to_grid is agent centered")
{
  const GridSpec spec{25, 200.0, {40.0, -10.0}};
  const double c = spec.cell_size();
  CHECK(world_to_grid(spec.origin, spec) == Vec2{12.0, 12.0});
  CHECK(world_to_grid(spec.origin + Vec2{c, 0.0}, spec) == Vec2{13.0, 12.0});
  const Vec2 g = world_to_grid(spec.origin + Vec2{3.7 * c, -1.2 * c}, spec);
  CHECK(g.x == doctest::Approx(15.7).epsilon(1e-12));
  CHECK(g.y == doctest::Approx(10.8).epsilon(1e-12));
}

TEST_CASE("grid_to_world inverts world_to_grid")
{
  const GridSpec spec{25, 200.0, {0.0, 0.0}};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-150.0, 150.0);
  for (int i = 0; i < 100; ++i) {
    const Vec2 p{u(rng), u(rng)};
    const Vec2 q = grid_to_world(world_to_grid(p, spec), spec);
    CHECK(q.x == doctest::Approx(p.x).epsilon(1e-12));
    CHECK(q.y == doctest::Approx(p.y).epsilon(1e-12));
  }
}

TEST_CASE("nearest_cell clamps to the border")
{
  const GridSpec spec{25, 200.0, {0.0, 0.0}};
  CHECK(nearest_cell({0.0, 0.0}, spec) == std::array<int, 2>{12, 12});
  CHECK(nearest_cell({1000.0, -1000.0}, spec) == std::array<int, 2>{24, 0});
}

TEST_CASE("bilinear weights for a hand-evaluated query")
{
  // (1-0.25)(1-0.75), 0.25(1-0.75), (1-0.25)0.75, 0.25*0.75
  const BilinearWeights w = bilinear_weights({0.25, 0.75}, 2);
  CHECK(w.weights[0] == doctest::Approx(0.1875).epsilon(1e-15));
  CHECK(w.weights[1] == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK(w.weights[2] == doctest::Approx(0.5625).epsilon(1e-15));
  CHECK(w.weights[3] == doctest::Approx(0.1875).epsilon(1e-15));
}

TEST_CASE("bilinear is exact at grid points, averages at midpoints and reproduces affine fields")
{
  const GridSpec spec{4, 40.0, {}};
  GridField f(spec, 2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int iy = 0; iy < 4; ++iy) {
    for (int ix = 0; ix < 4; ++ix) {
      f.at(0, ix, iy) = u(rng);
      f.at(1, ix, iy) = 0.5 + 2.0 * ix - 3.0 * iy;
    }
  }
  CHECK(bilinear(f, {2.0, 1.0})[0] == f.at(0, 2, 1));
  const double mean = 0.25 * (f.at(0, 1, 1) + f.at(0, 2, 1) + f.at(0, 1, 2) + f.at(0, 2, 2));
  CHECK(bilinear(f, {1.5, 1.5})[0] == doctest::Approx(mean).epsilon(1e-14));
  for (int i = 0; i < 50; ++i) {
    const Vec2 q{1.5 + 1.5 * u(rng), 1.5 + 1.5 * u(rng)};
    CHECK(bilinear(f, q)[1] == doctest::Approx(0.5 + 2.0 * q.x - 3.0 * q.y).epsilon(1e-12));
  }
}

TEST_CASE("bilinear weights are a convex combination for any query")
{
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-5.0, 30.0);
  for (int i = 0; i < 1000; ++i) {
    const BilinearWeights w = bilinear_weights({u(rng), u(rng)}, 25);
    double s = 0.0;
    for (double x : w.weights) {
      CHECK(x >= 0.0);
      s += x;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("bilinear rejects non-finite values")
{
  GridField f(GridSpec{3, 30.0, {}}, 1);
  f.at(0, 1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bilinear(f, {1.2, 1.2}), std::domain_error);
}

TEST_CASE("bilinear_sample agrees with the scalar path and its field gradient matches finite differences")
{
  const GridSpec spec{5, 50.0, {}};
  nn::Rng rng(9);
  ag::Tensor t = testing::random_leaf({3, 5, 5}, rng);
  const GridField f = GridField::from_tensor(t, spec);
  ag::Tensor q = ag::Tensor::from({0.4, 3.3, 2.9, 1.1, -2.0, 7.0}, {3, 2}, true);
  ag::Tensor out = ag::bilinear_sample(t, q);
  for (int p = 0; p < 3; ++p) {
    const auto ref = bilinear(f, {q[2 * p], q[2 * p + 1]});
    for (int c = 0; c < 3; ++c) CHECK(out[p * 3 + c] == doctest::Approx(ref[c]).epsilon(1e-14));
  }
  const auto check = testing::gradcheck([&] { return testing::project(ag::bilinear_sample(t, q)); }, {t});
  CHECK(check.rel_error < 1e-6);
}
}
