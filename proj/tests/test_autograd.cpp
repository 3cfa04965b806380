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

#include "gridplan/nn.hpp"
#include "gridplan/ops.hpp"
#include "gridplan/optim.hpp"

#include <cmath>

using namespace gridplan;
using ag::Tensor;
using testing::gradcheck;
using testing::project;
using testing::random_leaf;

TEST_SUITE("autograd")
{
TEST_CASE("elementwise ops match finite differences")
{
  nn::Rng rng(1);
  Tensor a = random_leaf({3, 4}, rng);
  Tensor b = random_leaf({3, 4}, rng, 0.5, 1.5);
  Tensor row = random_leaf({1, 4}, rng);
  Tensor col = random_leaf({3, 1}, rng);

  CHECK(gradcheck([&] { return project(a * b + a / b - b); }, {a, b}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(a * row + col); }, {a, row, col}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::exp(a) + ag::log(b) + ag::tanh(a)); }, {a, b}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::sigmoid(a) * ag::sqrt(b) + ag::square(a)); }, {a, b}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::relu(a) + ag::clamp(a, -0.3, 0.4)); }, {a}).rel_error < 1e-6);
  CHECK(gradcheck([&] { return project(a * 2.5 - 1.0 + (-a)); }, {a}).rel_error < 1e-7);
}

TEST_CASE("reductions and axis ops")
{
  nn::Rng rng(2);
  Tensor x = random_leaf({2, 3, 4}, rng);
  CHECK(gradcheck([&] { return ag::sum(ag::square(x)); }, {x}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return ag::mean(ag::exp(x)); }, {x}).rel_error < 1e-7);
  for (int axis = 0; axis < 3; ++axis) {
    CHECK(gradcheck([&] { return project(ag::sum_axis(ag::square(x), axis)); }, {x}).rel_error < 1e-7);
    CHECK(gradcheck([&] { return project(ag::mean_axis(x, axis, true)); }, {x}).rel_error < 1e-7);
    CHECK(gradcheck([&] { return project(ag::softmax(x, axis)); }, {x}).rel_error < 1e-7);
    CHECK(gradcheck([&] { return project(ag::log_softmax(x, axis)); }, {x}).rel_error < 1e-7);
    CHECK(gradcheck([&] { return project(ag::logsumexp(x, axis)); }, {x}).rel_error < 1e-7);
  }
  CHECK(gradcheck([&] { return ag::min_all(x); }, {x}).rel_error < 1e-7);
}

TEST_CASE("softmax rows sum to one and logsumexp is overflow safe")
{
  Tensor x = Tensor::from({1e4, 1e4 + 1.0, -1e4, 3.0, 3.0, 3.0}, {2, 3});
  Tensor p = ag::softmax(x, 1);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[3] == doctest::Approx(1.0 / 3.0));
  Tensor l = ag::logsumexp(x, 1);
  CHECK(l[0] == doctest::Approx(1e4 + 1.0 + std::log1p(std::exp(-1.0))));
  CHECK(std::isfinite(l[0]));
}

TEST_CASE("shape ops")
{
  nn::Rng rng(3);
  Tensor a = random_leaf({2, 3}, rng);
  Tensor b = random_leaf({2, 2}, rng);
  Tensor c = random_leaf({3, 4}, rng);
  CHECK(gradcheck([&] { return project(ag::concat({a, b}, 1)); }, {a, b}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::slice(ag::concat({a, b}, 1), 1, 1, 4)); }, {a, b}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::stack({a, a * 2.0}, 0)); }, {a}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::matmul(a, c)); }, {a, c}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::transpose(c)); }, {c}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::reshape(c, {2, 6})); }, {c}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::gather(c, {0, 5, 5, 11}, {2, 2})); }, {c}).rel_error < 1e-7);
}

TEST_CASE("conv2d matches finite differences for strides and padding")
{
  nn::Rng rng(4);
  Tensor x = random_leaf({2, 5, 5}, rng);
  Tensor w3 = random_leaf({3, 2, 3, 3}, rng);
  Tensor w2 = random_leaf({3, 2, 2, 2}, rng);
  Tensor w1 = random_leaf({3, 2, 1, 1}, rng);
  Tensor bias = random_leaf({3}, rng);
  CHECK(gradcheck([&] { return project(ag::conv2d(x, w3, bias, 1, 1)); }, {x, w3, bias}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::conv2d(x, w3, bias, 2, 1)); }, {x, w3, bias}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::conv2d(x, w2, Tensor{}, 2, 0)); }, {x, w2}).rel_error < 1e-7);
  CHECK(gradcheck([&] { return project(ag::conv2d(x, w1, bias)); }, {x, w1, bias}).rel_error < 1e-7);
}

TEST_CASE("conv2d agrees with a direct loop")
{
  nn::Rng rng(5);
  Tensor x = random_leaf({2, 4, 4}, rng);
  Tensor w = random_leaf({1, 2, 3, 3}, rng);
  Tensor y = ag::conv2d(x, w, Tensor{}, 1, 1);
  for (int oy = 0; oy < 4; ++oy) {
    for (int ox = 0; ox < 4; ++ox) {
      double s = 0.0;
      for (int c = 0; c < 2; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = oy + ky - 1, ix = ox + kx - 1;
            if (iy < 0 || ix < 0 || iy >= 4 || ix >= 4) continue;
            s += x[(c * 4 + iy) * 4 + ix] * w[(c * 3 + ky) * 3 + kx];
          }
        }
      }
      CHECK(y[oy * 4 + ox] == doctest::Approx(s).epsilon(1e-12));
    }
  }
}

TEST_CASE("bilinear_sample and scatter_kernel gradients")
{
  nn::Rng rng(6);
  Tensor field = random_leaf({2, 4, 5}, rng);
  Tensor coords = Tensor::from({0.3, 0.6, 3.7, 2.2, 1.5, 1.25}, {3, 2}, true);
  CHECK(gradcheck([&] { return project(ag::bilinear_sample(field, coords)); }, {field, coords}).rel_error < 1e-7);

  Tensor mass = random_leaf({4, 4}, rng, 0.0, 1.0);
  Tensor w = random_leaf({9, 4, 4}, rng, 0.0, 1.0);
  CHECK(gradcheck([&] { return project(ag::scatter_kernel(mass, w)); }, {mass, w}).rel_error < 1e-7);
}

TEST_CASE("attention and layer norm gradients")
{
  nn::Rng rng(7);
  Tensor q = random_leaf({2, 3, 4}, rng);
  Tensor k = random_leaf({2, 5, 4}, rng);
  Tensor v = random_leaf({2, 5, 4}, rng);
  CHECK(gradcheck([&] { return project(ag::attention(q, k, v, 2)); }, {q, k, v}).rel_error < 1e-7);

  Tensor x = random_leaf({3, 6}, rng);
  Tensor g = random_leaf({6}, rng);
  Tensor b = random_leaf({6}, rng);
  CHECK(gradcheck([&] { return project(ag::layer_norm(x, g, b)); }, {x, g, b}).rel_error < 1e-6);
}

TEST_CASE("attention weights of a two-key query follow the softmax of the scores")
{
  // q.k / sqrt(1) = (0, ln 3) -> weights (0.25, 0.75)
  Tensor q = Tensor::from({1.0}, {1, 1, 1});
  Tensor k = Tensor::from({0.0, std::log(3.0)}, {1, 2, 1});
  Tensor v = Tensor::from({1.0, 5.0}, {1, 2, 1});
  std::vector<double> w;
  Tensor out = ag::attention(q, k, v, 1, &w);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(out.item() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("graph is not recorded under NoGradGuard")
{
  Tensor a = Tensor::full({2}, 1.0, true);
  {
    ag::NoGradGuard guard;
    Tensor b = a * 3.0;
    CHECK_FALSE(b.requires_grad());
  }
  Tensor c = a * 3.0;
  CHECK(c.requires_grad());
}

TEST_CASE("gradients accumulate across shared subexpressions")
{
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = x * x + x;
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(5.0));
}
}

TEST_SUITE("nn")
{
TEST_CASE("layers match finite differences")
{
  nn::Rng rng(11);
  nn::GRUCell gru(3, 4, rng);
  Tensor x = random_leaf({2, 3}, rng);
  Tensor h = random_leaf({2, 4}, rng);
  CHECK(gradcheck([&] { return project(gru(x, h)); }, {x, h, gru.w_x, gru.w_h, gru.b_x}).rel_error < 1e-7);

  nn::ConvLSTMCell cell(2, 3, 3, rng);
  Tensor fx = random_leaf({2, 4, 4}, rng);
  nn::ConvLSTMState s{random_leaf({3, 4, 4}, rng), random_leaf({3, 4, 4}, rng)};
  CHECK(gradcheck(
          [&] {
            auto next = cell.step(cell.input_gates(fx), s);
            return project(next.h) + project(next.c, 9);
          },
          {fx, s.h, s.c, cell.conv_x.weight, cell.conv_h.weight})
          .rel_error < 1e-7);

  nn::MultiHeadAttention mha(8, 4, rng);
  Tensor q = random_leaf({1, 2, 8}, rng);
  Tensor m = random_leaf({1, 3, 8}, rng);
  CHECK(gradcheck([&] { return project(mha(q, m)); }, {q, m, mha.wq.weight, mha.wo.bias}).rel_error < 1e-7);
}

TEST_CASE("GRU with zero parameters keeps a zero state")
{
  nn::Rng rng(12);
  nn::GRUCell gru(3, 4, rng);
  for (Tensor * t : {&gru.w_x, &gru.w_h, &gru.b_x, &gru.b_h}) {
    for (double & v : t->mutable_data()) v = 0.0;
  }
  Tensor h = gru(Tensor::full({1, 3}, 0.7), Tensor::zeros({1, 4}));
  for (double v : h.data()) CHECK(v == 0.0);
}

TEST_CASE("dropout is the identity in evaluation mode")
{
  nn::Rng rng(13);
  Tensor x = random_leaf({4, 4}, rng);
  Tensor y = nn::dropout(x, 0.5, false, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("Adam minimizes a quadratic")
{
  Tensor w = Tensor::from({3.0, -2.0}, {2}, true);
  optim::Adam opt({w}, {.lr = 0.1});
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    ag::sum(ag::square(w - 1.0)).backward();
    opt.step();
  }
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-3));
}
}
