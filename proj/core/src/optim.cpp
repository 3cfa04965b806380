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

#include "gridplan/optim.hpp"

#include <cmath>

namespace gridplan::optim
{

Adam::Adam(std::vector<ag::Tensor> params, AdamOptions options)
: params_(std::move(params)), options_(options)
{
  for (const auto & p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::zero_grad()
{
  for (auto & p : params_) p.zero_grad();
}

double Adam::step(double grad_divisor)
{
  const double inv = 1.0 / grad_divisor;
  double sq = 0.0;
  for (auto & p : params_) {
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq) * inv;
  double scale = inv;
  if (options_.clip_norm > 0.0 && norm > options_.clip_norm) scale *= options_.clip_norm / norm;

  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto & p = params_[k];
    const auto g = p.grad();
    if (g.empty()) continue;
    auto w = p.mutable_data();
    auto & m = m_[k];
    auto & v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * scale;
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * gi;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * gi * gi;
      w[i] -= options_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + options_.eps);
    }
  }
  return norm;
}

}  // namespace gridplan::optim
