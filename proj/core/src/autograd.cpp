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

#include "gridplan/autograd.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace gridplan::ag
{

namespace
{
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t numel(const Shape & shape)
{
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) {
      throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    }
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape & shape)
{
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::span<double> Node::ensure_grad()
{
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(const Shape & shape, bool requires_grad)
{
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape & shape, double value, bool requires_grad)
{
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value.assign(numel(shape), value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(std::vector<double> values, const Shape & shape, bool requires_grad)
{
  if (values.size() != numel(shape)) {
    throw std::invalid_argument(
      "Tensor::from: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value.assign(values.begin(), values.end());
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
  return from({value}, {}, requires_grad);
}

int Tensor::dim(int axis) const
{
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw std::out_of_range("Tensor::dim axis out of range for shape " + shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(axis)];
}

void Tensor::zero_grad()
{
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const
{
  if (size() != 1) {
    throw std::logic_error("Tensor::item on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

Tensor Tensor::detach() const
{
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

void Tensor::backward() const
{
  if (size() != 1) {
    throw std::logic_error("backward() without seed requires a scalar, got " + shape_str(shape()));
  }
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void Tensor::backward(std::span<const double> seed) const
{
  if (seed.size() != size()) {
    throw std::invalid_argument("backward seed size mismatch");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the reachable subgraph.
  std::vector<Node *> order;
  std::unordered_set<Node *> visited;
  std::vector<std::pair<Node *, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto & [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node * child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  auto g = node_->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node * n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail
{

Tensor make_result(Shape shape, Buffer value, std::vector<Tensor> inputs, BackwardFn fn)
{
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto & t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto & t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

std::span<double> input_grad(Node & out, std::size_t i)
{
  Node & in = *out.inputs[i];
  if (!in.requires_grad) return {};
  return in.ensure_grad();
}

}  // namespace detail

}  // namespace gridplan::ag
