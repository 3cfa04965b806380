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

#ifndef GRIDPLAN_TESTS__SUPPORT_HPP_
#define GRIDPLAN_TESTS__SUPPORT_HPP_

#include "gridplan/autograd.hpp"
#include "gridplan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace gridplan::testing
{

/// Leaf tensor with U(lo, hi) entries that requires a gradient.
inline ag::Tensor random_leaf(const ag::Shape & shape, nn::Rng & rng, double lo = -1.0, double hi = 1.0)
{
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(ag::numel(shape));
  for (double & x : v) x = u(rng);
  return ag::Tensor::from(std::move(v), shape, true);
}

struct GradCheck
{
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-12)
  double max_abs = 0.0;
};

/**
 * Compares reverse-mode gradients of scalar `f` w.r.t. `leaves` with central
 * finite differences of step h.
 */
inline GradCheck gradcheck(
  const std::function<ag::Tensor()> & f, std::vector<ag::Tensor> leaves, double h = 1e-6)
{
  for (auto & t : leaves) t.zero_grad();
  f().backward();
  std::vector<double> analytic, numeric;
  for (auto & t : leaves) {
    auto g = t.grad();
    for (std::size_t i = 0; i < t.size(); ++i) analytic.push_back(g.empty() ? 0.0 : g[i]);
  }
  ag::NoGradGuard guard;
  for (auto & t : leaves) {
    auto v = t.mutable_data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x0 = v[i];
      v[i] = x0 + h;
      const double fp = f().item();
      v[i] = x0 - h;
      const double fm = f().item();
      v[i] = x0;
      numeric.push_back((fp - fm) / (2.0 * h));
    }
  }
  double diff = 0.0, na = 0.0, nn = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - numeric[i];
    diff += d * d;
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
    mx = std::max(mx, std::abs(d));
  }
  return {std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), 1e-12), mx};
}

/// Fixed pseudo-random projection so gradients of non-scalar outputs can be checked.
inline ag::Tensor project(const ag::Tensor & y, unsigned seed = 7)
{
  nn::Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(y.size());
  for (double & x : w) x = u(rng);
  return ag::sum(ag::mul(y, ag::Tensor::from(std::move(w), y.shape())));
}

}  // namespace gridplan::testing

#endif  // GRIDPLAN_TESTS__SUPPORT_HPP_
