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

#ifndef GRIDPLAN__AUTOGRAD_HPP_
#define GRIDPLAN__AUTOGRAD_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace gridplan::ag
{

using Shape = std::vector<int>;

/// Allocator returning 64-byte aligned storage so vectorized kernels see the
/// same alignment on every run (results are bitwise reproducible).
template <class T>
struct AlignedAllocator
{
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U> &) noexcept
  {
  }

  T * allocate(std::size_t n) { return static_cast<T *>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T * p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U> &) const noexcept
  {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t numel(const Shape & shape);
std::string shape_str(const Shape & shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

/**
 * @brief One vertex of the reverse-mode graph.
 *
 * `backward` reads `grad` of this node and accumulates into the grads of
 * `inputs`. Leaves have no backward function.
 */
struct Node
{
  Buffer value;
  Buffer grad;
  Shape shape;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node &)> backward;

  std::span<double> ensure_grad();
};

/**
 * @brief Dense row-major double tensor with reverse-mode differentiation.
 *
 * Tensors are cheap handles to a shared node. Operations build a graph only
 * when at least one input requires a gradient and gradient recording is on.
 */
class Tensor
{
public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape & shape, bool requires_grad = false);
  static Tensor full(const Shape & shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<double> values, const Shape & shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape & shape() const { return node_->shape; }
  int dim(int axis) const;
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  /// Mutable access to the values; only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->value; }
  /// Gradient accumulated by the last backward pass; empty if none reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  /// Copy of the values without graph history.
  Tensor detach() const;

  /// Seeds d(self)/d(self) = 1 for a scalar and propagates to every reachable leaf.
  void backward() const;
  /// Propagates an explicit upstream gradient of the same size as the tensor.
  void backward(std::span<const double> seed) const;

  const NodePtr & node() const noexcept { return node_; }

private:
  NodePtr node_;
};

/// True while gradient recording is enabled on this thread.
bool grad_enabled() noexcept;

/// Disables graph construction for its lifetime (inference, frozen stages).
class NoGradGuard
{
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard & operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

namespace detail
{
using BackwardFn = std::function<void(Node &)>;

/// Builds an op result; records `inputs` and `fn` only if some input needs a gradient.
Tensor make_result(Shape shape, Buffer value, std::vector<Tensor> inputs, BackwardFn fn);

/// Grad buffer of input `i` of `out`, or an empty span when that input does not need one.
std::span<double> input_grad(Node & out, std::size_t i);
}  // namespace detail

}  // namespace gridplan::ag

#endif  // GRIDPLAN__AUTOGRAD_HPP_
