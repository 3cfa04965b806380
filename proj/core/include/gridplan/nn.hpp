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

#ifndef GRIDPLAN__NN_HPP_
#define GRIDPLAN__NN_HPP_

#include "gridplan/autograd.hpp"
#include "gridplan/ops.hpp"

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace gridplan::nn
{

using ag::Tensor;
using Rng = std::mt19937_64;
using ParamVisitor = std::function<void(const std::string &, Tensor &)>;
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// Uniform(-bound, bound) leaf tensor that requires a gradient.
Tensor uniform_param(const ag::Shape & shape, double bound, Rng & rng);
Tensor zeros_param(const ag::Shape & shape);

/// Fully connected layer y = x W + b on [B, in] rows.
struct Linear
{
  Linear() = default;
  Linear(int in, int out, Rng & rng, bool with_bias = true);

  Tensor operator()(const Tensor & x) const;
  void visit(const ParamVisitor & f, const std::string & prefix);

  Tensor weight;  // [in, out]
  Tensor bias;    // [out] or undefined
};

/// Gated recurrent unit cell on batched rows (gate order r, z, n).
struct GRUCell
{
  GRUCell() = default;
  GRUCell(int in, int hidden, Rng & rng);

  /// x is [B, in], h is [B, hidden]; returns the next [B, hidden] state.
  Tensor operator()(const Tensor & x, const Tensor & h) const;
  void visit(const ParamVisitor & f, const std::string & prefix);

  int hidden = 0;
  Tensor w_x;  // [in, 3H]
  Tensor w_h;  // [H, 3H]
  Tensor b_x;  // [3H]
  Tensor b_h;  // [3H]
};

/// 2-D convolution layer on a single [C, H, W] map.
struct Conv2d
{
  Conv2d() = default;
  Conv2d(int cin, int cout, int kernel, int stride, int padding, Rng & rng, bool with_bias = true);

  Tensor operator()(const Tensor & x) const;
  void visit(const ParamVisitor & f, const std::string & prefix);

  int stride = 1;
  int padding = 0;
  Tensor weight;  // [cout, cin, k, k]
  Tensor bias;    // [cout] or undefined
};

/// Hidden and cell maps of a convolutional LSTM, each [hidden, H, W].
struct ConvLSTMState
{
  Tensor h;
  Tensor c;
};

/**
 * @brief Convolutional LSTM cell (gate order i, f, o, g).
 *
 * The input contribution is split out so that a constant input map can be
 * convolved once per sequence and reused at every step.
 */
struct ConvLSTMCell
{
  ConvLSTMCell() = default;
  ConvLSTMCell(int cin, int hidden, int kernel, Rng & rng);

  /// Input-to-gate pre-activations [4*hidden, H, W] (includes the bias).
  Tensor input_gates(const Tensor & x) const;
  ConvLSTMState step(const Tensor & x_gates, const ConvLSTMState & state) const;
  void visit(const ParamVisitor & f, const std::string & prefix);

  int hidden = 0;
  Conv2d conv_x;
  Conv2d conv_h;
};

struct LayerNorm
{
  LayerNorm() = default;
  explicit LayerNorm(int d);

  Tensor operator()(const Tensor & x) const { return ag::layer_norm(x, gain, bias); }
  void visit(const ParamVisitor & f, const std::string & prefix);

  Tensor gain;
  Tensor bias;
};

/// Projected multi-head attention (queries attend over key/value rows per group).
struct MultiHeadAttention
{
  MultiHeadAttention() = default;
  MultiHeadAttention(int d_model, int heads, Rng & rng);

  /// query is [G, Lq, D]; memory is [G, Lk, D]. Returns [G, Lq, D].
  Tensor operator()(
    const Tensor & query, const Tensor & memory, std::vector<double> * weights = nullptr) const;
  /// Same as operator() with keys and values already projected ([G, Lk, D] each).
  Tensor attend_projected(
    const Tensor & query, const Tensor & keys, const Tensor & values,
    std::vector<double> * weights = nullptr) const;
  Tensor project_keys(const Tensor & memory) const;
  Tensor project_values(const Tensor & memory) const;
  void visit(const ParamVisitor & f, const std::string & prefix);

  int heads = 1;
  Linear wq, wk, wv, wo;
};

/// Inverted dropout; identity when `training` is false or p == 0.
Tensor dropout(const Tensor & x, double p, bool training, Rng & rng);

/// Applies a rank-2 linear map to the last axis of any tensor.
Tensor apply_last(const Linear & layer, const Tensor & x);

template <typename M>
NamedParams named_parameters(M & module, const std::string & prefix = "")
{
  NamedParams out;
  module.visit([&out](const std::string & name, Tensor & t) { out.emplace_back(name, t); }, prefix);
  return out;
}

std::size_t parameter_count(const NamedParams & params);

}  // namespace gridplan::nn

#endif  // GRIDPLAN__NN_HPP_
