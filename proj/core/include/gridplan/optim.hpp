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

#ifndef GRIDPLAN__OPTIM_HPP_
#define GRIDPLAN__OPTIM_HPP_

#include "gridplan/autograd.hpp"

#include <vector>

namespace gridplan::optim
{

struct AdamOptions
{
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 0.0;
};

/// Adaptive-moment gradient descent over a fixed list of leaf tensors.
class Adam
{
public:
  Adam(std::vector<ag::Tensor> params, AdamOptions options);

  void zero_grad();
  /// Applies one update scaled by 1/`grad_divisor` (mini-batch averaging). Returns the pre-clip grad norm.
  double step(double grad_divisor = 1.0);

  void set_lr(double lr) { options_.lr = lr; }
  const AdamOptions & options() const { return options_; }
  long steps() const { return t_; }

private:
  std::vector<ag::Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  long t_ = 0;
};

}  // namespace gridplan::optim

#endif  // GRIDPLAN__OPTIM_HPP_
