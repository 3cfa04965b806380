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

#include "gridplan/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace gridplan::nn
{

using namespace gridplan::ag;

Tensor uniform_param(const Shape & shape, double bound, Rng & rng)
{
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(numel(shape));
  for (double & x : v) x = dist(rng);
  return Tensor::from(std::move(v), shape, true);
}

Tensor zeros_param(const Shape & shape) { return Tensor::zeros(shape, true); }

std::size_t parameter_count(const NamedParams & params)
{
  std::size_t n = 0;
  for (const auto & [name, t] : params) n += t.size();
  return n;
}

Linear::Linear(int in, int out, Rng & rng, bool with_bias)
{
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = uniform_param({in, out}, bound, rng);
  if (with_bias) bias = uniform_param({out}, bound, rng);
}

Tensor Linear::operator()(const Tensor & x) const
{
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

void Linear::visit(const ParamVisitor & f, const std::string & prefix)
{
  f(prefix + "weight", weight);
  if (bias.defined()) f(prefix + "bias", bias);
}

Tensor apply_last(const Linear & layer, const Tensor & x)
{
  Shape shape = x.shape();
  const int d = shape.back();
  const int rows = static_cast<int>(x.size() / static_cast<std::size_t>(d));
  Tensor y = layer(reshape(x, {rows, d}));
  shape.back() = y.dim(1);
  return reshape(y, shape);
}

GRUCell::GRUCell(int in, int hidden_size, Rng & rng) : hidden(hidden_size)
{
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  w_x = uniform_param({in, 3 * hidden_size}, bound, rng);
  w_h = uniform_param({hidden_size, 3 * hidden_size}, bound, rng);
  b_x = uniform_param({3 * hidden_size}, bound, rng);
  b_h = uniform_param({3 * hidden_size}, bound, rng);
}

Tensor GRUCell::operator()(const Tensor & x, const Tensor & h) const
{
  const Tensor gx = add(matmul(x, w_x), b_x);
  const Tensor gh = add(matmul(h, w_h), b_h);
  const int hs = hidden;
  const Tensor r = sigmoid(add(slice(gx, 1, 0, hs), slice(gh, 1, 0, hs)));
  const Tensor z = sigmoid(add(slice(gx, 1, hs, 2 * hs), slice(gh, 1, hs, 2 * hs)));
  const Tensor n = ag::tanh(add(slice(gx, 1, 2 * hs, 3 * hs), mul(r, slice(gh, 1, 2 * hs, 3 * hs))));
  // h' = n + z * (h - n)
  return add(n, mul(z, sub(h, n)));
}

void GRUCell::visit(const ParamVisitor & f, const std::string & prefix)
{
  f(prefix + "w_x", w_x);
  f(prefix + "w_h", w_h);
  f(prefix + "b_x", b_x);
  f(prefix + "b_h", b_h);
}

Conv2d::Conv2d(int cin, int cout, int kernel, int stride_, int padding_, Rng & rng, bool with_bias)
: stride(stride_), padding(padding_)
{
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * kernel * kernel));
  weight = uniform_param({cout, cin, kernel, kernel}, bound, rng);
  if (with_bias) bias = uniform_param({cout}, bound, rng);
}

Tensor Conv2d::operator()(const Tensor & x) const
{
  return conv2d(x, weight, bias, stride, padding);
}

void Conv2d::visit(const ParamVisitor & f, const std::string & prefix)
{
  f(prefix + "weight", weight);
  if (bias.defined()) f(prefix + "bias", bias);
}

ConvLSTMCell::ConvLSTMCell(int cin, int hidden_size, int kernel, Rng & rng) : hidden(hidden_size)
{
  conv_x = Conv2d(cin, 4 * hidden_size, kernel, 1, kernel / 2, rng, true);
  conv_h = Conv2d(hidden_size, 4 * hidden_size, kernel, 1, kernel / 2, rng, false);
  // forget-gate bias starts at 1
  auto b = conv_x.bias.mutable_data();
  for (int i = hidden_size; i < 2 * hidden_size; ++i) b[static_cast<std::size_t>(i)] += 1.0;
}

Tensor ConvLSTMCell::input_gates(const Tensor & x) const { return conv_x(x); }

ConvLSTMState ConvLSTMCell::step(const Tensor & x_gates, const ConvLSTMState & state) const
{
  const Tensor gates = add(x_gates, conv_h(state.h));
  const int hs = hidden;
  const Tensor i = sigmoid(slice(gates, 0, 0, hs));
  const Tensor f = sigmoid(slice(gates, 0, hs, 2 * hs));
  const Tensor o = sigmoid(slice(gates, 0, 2 * hs, 3 * hs));
  const Tensor g = ag::tanh(slice(gates, 0, 3 * hs, 4 * hs));
  ConvLSTMState next;
  next.c = add(mul(f, state.c), mul(i, g));
  next.h = mul(o, ag::tanh(next.c));
  return next;
}

void ConvLSTMCell::visit(const ParamVisitor & f, const std::string & prefix)
{
  conv_x.visit(f, prefix + "conv_x.");
  conv_h.visit(f, prefix + "conv_h.");
}

LayerNorm::LayerNorm(int d)
{
  gain = Tensor::full({d}, 1.0, true);
  bias = Tensor::zeros({d}, true);
}

void LayerNorm::visit(const ParamVisitor & f, const std::string & prefix)
{
  f(prefix + "gain", gain);
  f(prefix + "bias", bias);
}

MultiHeadAttention::MultiHeadAttention(int d_model, int heads_, Rng & rng) : heads(heads_)
{
  if (d_model % heads_ != 0) {
    throw std::invalid_argument("MultiHeadAttention: heads must divide the model dimension");
  }
  wq = Linear(d_model, d_model, rng);
  wk = Linear(d_model, d_model, rng);
  wv = Linear(d_model, d_model, rng);
  wo = Linear(d_model, d_model, rng);
}

Tensor MultiHeadAttention::project_keys(const Tensor & memory) const
{
  return apply_last(wk, memory);
}

Tensor MultiHeadAttention::project_values(const Tensor & memory) const
{
  return apply_last(wv, memory);
}

Tensor MultiHeadAttention::attend_projected(
  const Tensor & query, const Tensor & keys, const Tensor & values,
  std::vector<double> * weights) const
{
  const Tensor q = apply_last(wq, query);
  return apply_last(wo, attention(q, keys, values, heads, weights));
}

Tensor MultiHeadAttention::operator()(
  const Tensor & query, const Tensor & memory, std::vector<double> * weights) const
{
  return attend_projected(query, project_keys(memory), project_values(memory), weights);
}

void MultiHeadAttention::visit(const ParamVisitor & f, const std::string & prefix)
{
  wq.visit(f, prefix + "wq.");
  wk.visit(f, prefix + "wk.");
  wv.visit(f, prefix + "wv.");
  wo.visit(f, prefix + "wo.");
}

Tensor dropout(const Tensor & x, double p, bool training, Rng & rng)
{
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> mask(x.size());
  const double scale = 1.0 / (1.0 - p);
  for (double & m : mask) m = keep(rng) ? scale : 0.0;
  return mul(x, Tensor::from(std::move(mask), x.shape()));
}

}  // namespace gridplan::nn
