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

#ifndef GRIDPLAN__OPS_HPP_
#define GRIDPLAN__OPS_HPP_

#include "gridplan/autograd.hpp"

#include <vector>

/// Differentiable tensor operations. All functions are pure; shapes are row-major.
namespace gridplan::ag
{

// Elementwise arithmetic with numpy-style trailing-axis broadcasting.
Tensor add(const Tensor & a, const Tensor & b);
Tensor sub(const Tensor & a, const Tensor & b);
Tensor mul(const Tensor & a, const Tensor & b);
Tensor div(const Tensor & a, const Tensor & b);

Tensor add_scalar(const Tensor & x, double s);
Tensor mul_scalar(const Tensor & x, double s);

Tensor neg(const Tensor & x);
Tensor exp(const Tensor & x);
Tensor log(const Tensor & x);
Tensor tanh(const Tensor & x);
Tensor sigmoid(const Tensor & x);
Tensor relu(const Tensor & x);
Tensor sqrt(const Tensor & x);
Tensor square(const Tensor & x);
/// Clamp to [lo, hi]; gradient is zero where the clamp is active.
Tensor clamp(const Tensor & x, double lo, double hi);

inline Tensor operator+(const Tensor & a, const Tensor & b) { return add(a, b); }
inline Tensor operator-(const Tensor & a, const Tensor & b) { return sub(a, b); }
inline Tensor operator*(const Tensor & a, const Tensor & b) { return mul(a, b); }
inline Tensor operator/(const Tensor & a, const Tensor & b) { return div(a, b); }
inline Tensor operator-(const Tensor & x) { return neg(x); }
inline Tensor operator+(const Tensor & a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor & a, double s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor & a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor & a) { return mul_scalar(a, s); }

// Reductions.
Tensor sum(const Tensor & x);
Tensor mean(const Tensor & x);
Tensor sum_axis(const Tensor & x, int axis, bool keepdim = false);
Tensor mean_axis(const Tensor & x, int axis, bool keepdim = false);
/// Minimum over all elements; the gradient goes to the first minimizer.
Tensor min_all(const Tensor & x);

Tensor softmax(const Tensor & x, int axis);
Tensor log_softmax(const Tensor & x, int axis);
/// Overflow-safe log-sum-exp; `axis` is removed from the result shape.
Tensor logsumexp(const Tensor & x, int axis);

/// [M,K] x [K,N] -> [M,N].
Tensor matmul(const Tensor & a, const Tensor & b);
/// Transpose of a rank-2 tensor.
Tensor transpose(const Tensor & a);

Tensor reshape(const Tensor & x, const Shape & shape);
Tensor concat(const std::vector<Tensor> & parts, int axis);
Tensor slice(const Tensor & x, int axis, int begin, int end);
/// Stacks equally-shaped tensors along a new axis.
Tensor stack(const std::vector<Tensor> & parts, int axis);
/// out.flat[i] = x.flat[indices[i]]; the backward pass scatter-adds.
Tensor gather(const Tensor & x, std::vector<int> indices, const Shape & out_shape);

/**
 * @brief 2-D convolution of a single feature map.
 *
 * x is [Cin, H, W], weight is [Cout, Cin, kh, kw], bias is [Cout] or undefined.
 * Zero padding on all sides.
 */
Tensor conv2d(
  const Tensor & x, const Tensor & weight, const Tensor & bias, int stride = 1, int padding = 0);

/**
 * @brief Bilinear lookup of a [C, H, W] field at P continuous grid coordinates.
 *
 * coords is [P, 2] holding (x, y) with x along W and y along H. Coordinates
 * are clamped to [0, W-1] x [0, H-1]; the coordinate gradient is zero along
 * a clamped axis. Returns [P, C].
 */
Tensor bilinear_sample(const Tensor & field, const Tensor & coords);

/**
 * @brief Scatters each cell's mass over its k x k neighborhood.
 *
 * mass has H*W elements; weights is [k*k, H, W] with tap index
 * (dy + k/2) * k + (dx + k/2). Mass landing off-grid is dropped. Returns [H, W].
 */
Tensor scatter_kernel(const Tensor & mass, const Tensor & weights);

/**
 * @brief Multi-head scaled dot-product attention over G independent groups.
 *
 * q is [G, Lq, D]; k and v are [G, Lk, D]; D must be divisible by `heads`.
 * Returns [G, Lq, D] with heads concatenated along the last axis. If
 * `weights_out` is given it receives the [G, heads, Lq, Lk] attention weights.
 */
Tensor attention(
  const Tensor & q, const Tensor & k, const Tensor & v, int heads,
  std::vector<double> * weights_out = nullptr);

/// Layer normalization over the last axis of x with gain and bias of size D.
Tensor layer_norm(const Tensor & x, const Tensor & gain, const Tensor & bias, double eps = 1e-5);

}  // namespace gridplan::ag

#endif  // GRIDPLAN__OPS_HPP_
