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

#include "gridplan/ops.hpp"
#include "gridplan/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

using namespace gridplan;
using ag::Tensor;

namespace
{

RefinementConfig small_config()
{
  RefinementConfig c;
  c.t_f = 3;
  c.motion_hidden = 4;
  c.d_model = 8;
  c.heads = 2;
  c.layers = 2;
  c.ffn = 16;
  c.k = 5;
  return c;
}

double wcss(const std::vector<std::vector<double>> & pts, const std::vector<std::vector<double>> & cents)
{
  double s = 0.0;
  for (const auto & p : pts) {
    double best = 1e300;
    for (const auto & c : cents) {
      double d = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) d += (p[j] - c[j]) * (p[j] - c[j]);
      best = std::min(best, d);
    }
    s += best;
  }
  return s;
}

}  // namespace

TEST_SUITE("refinement")
{
TEST_CASE("refinement maps C samples to K representatives")
{
  nn::Rng rng(61);
  RefinementNetwork net(RefinementConfig{}, rng);
  const Tensor samples = testing::random_leaf({1, 200, 24}, rng, -50.0, 50.0);
  const Tensor m0 = testing::random_leaf({1, 64}, rng);
  const Tensor out = net(samples, m0);
  CHECK(out.shape() == ag::Shape{1, 20, 24});
  for (double v : out.data()) CHECK(std::isfinite(v));
}

TEST_CASE("refinement output is invariant to sample order and deterministic in eval mode")
{
  nn::Rng rng(62);
  const RefinementConfig c = small_config();
  RefinementNetwork net(c, rng);
  const int s = 2, n = 9, w = 6;
  const Tensor samples = testing::random_leaf({s, n, w}, rng, -30.0, 30.0);
  const Tensor m0 = testing::random_leaf({s, 4}, rng);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> shuffled(samples.size());
  for (int b = 0; b < s; ++b) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < w; ++j) shuffled[(b * n + i) * w + j] = samples[(b * n + perm[i]) * w + j];
    }
  }
  const Tensor a = net(samples, m0);
  const Tensor b = net(Tensor::from(shuffled, {s, n, w}), m0);
  const Tensor again = net(samples, m0);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    CHECK(a[i] == again[i]);
  }
  CHECK(diff < 1e-5);

  nn::Rng d1(5), d2(5), d3(6);
  const Tensor t1 = net(samples, m0, true, d1);
  const Tensor t2 = net(samples, m0, true, d2);
  const Tensor t3 = net(samples, m0, true, d3);
  bool differs = false;
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i] == t2[i]);
    differs = differs || t1[i] != t3[i];
  }
  CHECK(differs);

  CHECK_THROWS_AS(net(Tensor::zeros({1, 0, 6}), Tensor::zeros({1, 4})), std::invalid_argument);
  CHECK_THROWS_AS(net(Tensor::zeros({1, 3, 5}), Tensor::zeros({1, 4})), std::invalid_argument);
  CHECK_THROWS_AS(net(Tensor::zeros({2, 3, 6}), Tensor::zeros({1, 4})), std::invalid_argument);
}

TEST_CASE("refinement gradients match finite differences")
{
  nn::Rng rng(63);
  RefinementConfig c = small_config();
  c.layers = 1;
  c.dropout = 0.0;
  RefinementNetwork net(c, rng);
  Tensor samples = testing::random_leaf({1, 4, 6}, rng, -20.0, 20.0);
  Tensor m0 = testing::random_leaf({1, 4}, rng);
  CHECK(testing::gradcheck([&] { return testing::project(net(samples, m0)); }, {samples, m0}, 1e-5).rel_error < 1e-4);
}

TEST_CASE("k-means on separated clusters")
{
  nn::Rng rng(64);
  const std::vector<std::vector<double>> pts{{0, 0}, {0, 1}, {10, 0}, {10, 1}};
  const KMeansResult r = kmeans(pts, 2, rng);
  REQUIRE(r.centroids.size() == 2);
  std::vector<std::vector<double>> c = r.centroids;
  std::sort(c.begin(), c.end());
  CHECK(c[0] == std::vector<double>{0.0, 0.5});
  CHECK(c[1] == std::vector<double>{10.0, 0.5});
  CHECK(r.objective.back() == doctest::Approx(1.0));
  CHECK(r.assignment[0] == r.assignment[1]);
  CHECK(r.assignment[2] == r.assignment[3]);
  CHECK(r.assignment[0] != r.assignment[2]);
}

TEST_CASE("k-means objective is non-increasing and matches its centroids")
{
  nn::Rng rng(65);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 300; ++i) {
    const double cx = 8.0 * (i % 6);
    pts.push_back({cx + noise(rng), noise(rng), cx * 0.5 + noise(rng), noise(rng)});
  }
  for (int trial = 0; trial < 5; ++trial) {
    const KMeansResult r = kmeans(pts, 6, rng);
    for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1] + 1e-9);
    CHECK(r.objective.back() == doctest::Approx(wcss(pts, r.centroids)).epsilon(1e-9));
    CHECK(r.iterations <= 100);
  }
}

TEST_CASE("k-means edge cases")
{
  nn::Rng rng(66);
  const std::vector<std::vector<double>> same(5, std::vector<double>{1.0, 2.0});
  const KMeansResult r = kmeans(same, 3, rng);
  CHECK(r.centroids.size() == 3);
  for (const auto & c : r.centroids) CHECK(c == std::vector<double>{1.0, 2.0});
  CHECK(r.objective.back() == 0.0);
  CHECK_THROWS_AS(kmeans(same, 6, rng), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(same, 0, rng), std::invalid_argument);
}
}
