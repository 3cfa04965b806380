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

#include "gridplan/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace gridplan::ag
{

using detail::input_grad;
using detail::make_result;

namespace
{

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Strided = Eigen::OuterStride<>;
using SMapMat = Eigen::Map<RowMat, 0, Strided>;
using CSMapMat = Eigen::Map<const RowMat, 0, Strided>;

int normalize_axis(int axis, int rank)
{
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw std::out_of_range("axis out of range");
  return axis;
}

// Splits a shape into [outer, n, inner] around `axis`.
struct AxisSplit
{
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape & shape, int axis)
{
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(shape[i]);
  s.n = static_cast<std::size_t>(shape[axis]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) {
    s.inner *= static_cast<std::size_t>(shape[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Broadcasting
// ---------------------------------------------------------------------------

struct Broadcast
{
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  bool same = false;
  bool b_scalar = false;
};

Broadcast plan_broadcast(const Shape & a, const Shape & b)
{
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  if (numel(b) == 1 && b.size() <= a.size()) {
    bc.out = a;
    bc.b_scalar = true;
    return bc;
  }
  const std::size_t r = std::max(a.size(), b.size());
  bc.out.assign(r, 1);
  bc.stride_a.assign(r, 0);
  bc.stride_b.assign(r, 0);
  std::size_t sa = 1;
  std::size_t sb = 1;
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t i = r - 1 - k;
    const int da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const int db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    bc.out[i] = std::max(da, db);
    bc.stride_a[i] = da == 1 ? 0 : sa;
    bc.stride_b[i] = db == 1 ? 0 : sb;
    sa *= static_cast<std::size_t>(da);
    sb *= static_cast<std::size_t>(db);
  }
  return bc;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <typename F>
void for_each_broadcast(const Broadcast & bc, F && f)
{
  const std::size_t total = numel(bc.out);
  if (bc.same) {
    for (std::size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  if (bc.b_scalar) {
    for (std::size_t i = 0; i < total; ++i) f(i, i, std::size_t{0});
    return;
  }
  const std::size_t r = bc.out.size();
  std::vector<int> idx(r, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, ia, ib);
    for (std::size_t k = r; k-- > 0;) {
      ++idx[k];
      ia += bc.stride_a[k];
      ib += bc.stride_b[k];
      if (idx[k] < bc.out[k]) break;
      ia -= bc.stride_a[k] * static_cast<std::size_t>(bc.out[k]);
      ib -= bc.stride_b[k] * static_cast<std::size_t>(bc.out[k]);
      idx[k] = 0;
    }
  }
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

Tensor binary(const Tensor & a, const Tensor & b, BinOp op)
{
  auto bc = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape()));
  const auto av = a.data();
  const auto bv = b.data();
  Buffer out(numel(bc->out));
  for_each_broadcast(*bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    switch (op) {
      case BinOp::kAdd: out[i] = av[ia] + bv[ib]; break;
      case BinOp::kSub: out[i] = av[ia] - bv[ib]; break;
      case BinOp::kMul: out[i] = av[ia] * bv[ib]; break;
      case BinOp::kDiv: out[i] = av[ia] / bv[ib]; break;
    }
  });
  Shape shape = bc->out;
  return make_result(std::move(shape), std::move(out), {a, b}, [bc, op](Node & self) {
    auto ga = input_grad(self, 0);
    auto gb = input_grad(self, 1);
    const auto & av = self.inputs[0]->value;
    const auto & bv = self.inputs[1]->value;
    const auto & g = self.grad;
    for_each_broadcast(*bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      const double gi = g[i];
      switch (op) {
        case BinOp::kAdd:
          if (!ga.empty()) ga[ia] += gi;
          if (!gb.empty()) gb[ib] += gi;
          break;
        case BinOp::kSub:
          if (!ga.empty()) ga[ia] += gi;
          if (!gb.empty()) gb[ib] -= gi;
          break;
        case BinOp::kMul:
          if (!ga.empty()) ga[ia] += gi * bv[ib];
          if (!gb.empty()) gb[ib] += gi * av[ia];
          break;
        case BinOp::kDiv:
          if (!ga.empty()) ga[ia] += gi / bv[ib];
          if (!gb.empty()) gb[ib] -= gi * av[ia] / (bv[ib] * bv[ib]);
          break;
      }
    });
  });
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor & x, Fwd fwd, Deriv deriv)
{
  const auto xv = x.data();
  Buffer out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node & self) {
    auto gx = input_grad(self, 0);
    if (gx.empty()) return;
    const auto & xv = self.inputs[0]->value;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += self.grad[i] * deriv(xv[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor & a, const Tensor & b) { return binary(a, b, BinOp::kAdd); }
Tensor sub(const Tensor & a, const Tensor & b) { return binary(a, b, BinOp::kSub); }
Tensor mul(const Tensor & a, const Tensor & b) { return binary(a, b, BinOp::kMul); }
Tensor div(const Tensor & a, const Tensor & b) { return binary(a, b, BinOp::kDiv); }

Tensor add_scalar(const Tensor & x, double s)
{
  return unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor & x, double s)
{
  return unary(x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor & x) { return mul_scalar(x, -1.0); }

Tensor exp(const Tensor & x)
{
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor & x)
{
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor & x)
{
  return unary(
    x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor & x)
{
  return unary(
    x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
    [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor & x)
{
  return unary(
    x, [](double v) { return v > 0.0 ? v : 0.0; },
    [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sqrt(const Tensor & x)
{
  return unary(
    x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor & x)
{
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor & x, double lo, double hi)
{
  return unary(
    x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
    [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor & x)
{
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({}, {s}, {x}, [](Node & self) {
    auto gx = input_grad(self, 0);
    for (double & g : gx) g += self.grad[0];
  });
}

Tensor mean(const Tensor & x)
{
  return mul_scalar(sum(x), 1.0 / static_cast<double>(std::max<std::size_t>(x.size(), 1)));
}

Tensor sum_axis(const Tensor & x, int axis, bool keepdim)
{
  axis = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  const auto xv = x.data();
  Buffer out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.n; ++j) {
      const double * src = xv.data() + (o * s.n + j) * s.inner;
      double * dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  Shape shape = x.shape();
  if (keepdim) {
    shape[static_cast<std::size_t>(axis)] = 1;
  } else {
    shape.erase(shape.begin() + axis);
  }
  return make_result(std::move(shape), std::move(out), {x}, [s](Node & self) {
    auto gx = input_grad(self, 0);
    if (gx.empty()) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < s.n; ++j) {
        double * dst = gx.data() + (o * s.n + j) * s.inner;
        const double * src = self.grad.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor mean_axis(const Tensor & x, int axis, bool keepdim)
{
  const int n = x.dim(axis);
  return mul_scalar(sum_axis(x, axis, keepdim), 1.0 / static_cast<double>(std::max(n, 1)));
}

Tensor min_all(const Tensor & x)
{
  const auto xv = x.data();
  if (xv.empty()) throw std::invalid_argument("min_all of empty tensor");
  const auto it = std::min_element(xv.begin(), xv.end());
  const std::size_t arg = static_cast<std::size_t>(it - xv.begin());
  return make_result({}, {*it}, {x}, [arg](Node & self) {
    auto gx = input_grad(self, 0);
    if (!gx.empty()) gx[arg] += self.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

namespace
{

// Computes log-softmax along the split axis into `out`.
void log_softmax_raw(std::span<const double> x, const AxisSplit & s, Buffer & out)
{
  out.resize(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) m = std::max(m, x[base + j * s.inner]);
      double acc = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) acc += std::exp(x[base + j * s.inner] - m);
      const double lse = m + std::log(acc);
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] = x[base + j * s.inner] - lse;
    }
  }
}

}  // namespace

Tensor softmax(const Tensor & x, int axis)
{
  axis = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  Buffer out;
  log_softmax_raw(x.data(), s, out);
  for (double & v : out) v = std::exp(v);
  return make_result(x.shape(), std::move(out), {x}, [s](Node & self) {
    auto gx = input_grad(self, 0);
    if (gx.empty()) return;
    const auto & y = self.value;
    const auto & g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.n * s.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t k = base + j * s.inner;
          gx[k] += y[k] * (g[k] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor & x, int axis)
{
  axis = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  Buffer out;
  log_softmax_raw(x.data(), s, out);
  return make_result(x.shape(), std::move(out), {x}, [s](Node & self) {
    auto gx = input_grad(self, 0);
    if (gx.empty()) return;
    const auto & y = self.value;
    const auto & g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.n * s.inner + i;
        double gsum = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) gsum += g[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t k = base + j * s.inner;
          gx[k] += g[k] - std::exp(y[k]) * gsum;
        }
      }
    }
  });
}

Tensor logsumexp(const Tensor & x, int axis)
{
  axis = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  const auto xv = x.data();
  Buffer out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) m = std::max(m, xv[base + j * s.inner]);
      double acc = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) acc += std::exp(xv[base + j * s.inner] - m);
      out[o * s.inner + i] = m + std::log(acc);
    }
  }
  Shape shape = x.shape();
  shape.erase(shape.begin() + axis);
  return make_result(std::move(shape), std::move(out), {x}, [s](Node & self) {
    auto gx = input_grad(self, 0);
    if (gx.empty()) return;
    const auto & xv = self.inputs[0]->value;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.n * s.inner + i;
        const double lse = self.value[o * s.inner + i];
        const double g = self.grad[o * s.inner + i];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t k = base + j * s.inner;
          gx[k] += g * std::exp(xv[k] - lse);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and shape manipulation
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor & a, const Tensor & b)
{
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument(
      "matmul shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int m = a.dim(0);
  const int k = a.dim(1);
  const int n = b.dim(1);
  Buffer out(static_cast<std::size_t>(m) * n);
  MapMat(out.data(), m, n).noalias() =
    CMapMat(a.data().data(), m, k) * CMapMat(b.data().data(), k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node & self) {
    CMapMat g(self.grad.data(), m, n);
    auto ga = input_grad(self, 0);
    auto gb = input_grad(self, 1);
    if (!ga.empty()) {
      MapMat(ga.data(), m, k).noalias() += g * CMapMat(self.inputs[1]->value.data(), k, n).transpose();
    }
    if (!gb.empty()) {
      MapMat(gb.data(), k, n).noalias() += CMapMat(self.inputs[0]->value.data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor & a)
{
  if (a.rank() != 2) throw std::invalid_argument("transpose expects rank 2");
  const int m = a.dim(0);
  const int n = a.dim(1);
  Buffer out(a.size());
  MapMat(out.data(), n, m) = CMapMat(a.data().data(), m, n).transpose();
  return make_result({n, m}, std::move(out), {a}, [m, n](Node & self) {
    auto ga = input_grad(self, 0);
    if (!ga.empty()) MapMat(ga.data(), m, n) += CMapMat(self.grad.data(), n, m).transpose();
  });
}

Tensor reshape(const Tensor & x, const Shape & shape)
{
  if (numel(shape) != x.size()) {
    throw std::invalid_argument(
      "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
  }
  Buffer out(x.data().begin(), x.data().end());
  return make_result(shape, std::move(out), {x}, [](Node & self) {
    auto gx = input_grad(self, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor> & parts, int axis)
{
  if (parts.empty()) throw std::invalid_argument("concat of no tensors");
  const int rank = parts[0].rank();
  axis = normalize_axis(axis, rank);
  Shape shape = parts[0].shape();
  int total = 0;
  for (const auto & p : parts) {
    if (p.rank() != rank) throw std::invalid_argument("concat rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != axis && p.shape()[d] != shape[d]) {
        throw std::invalid_argument(
          "concat shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(shape));
      }
    }
    total += p.shape()[axis];
  }
  shape[axis] = total;
  const AxisSplit s = split_at(shape, axis);
  std::vector<std::size_t> widths;
  for (const auto & p : parts) widths.push_back(static_cast<std::size_t>(p.shape()[axis]) * s.inner);
  const std::size_t row = static_cast<std::size_t>(total) * s.inner;
  Buffer out(numel(shape));
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(src.data() + o * widths[p], widths[p], out.data() + o * row + col);
    }
    col += widths[p];
  }
  return make_result(std::move(shape), std::move(out), parts, [s, widths, row](Node & self) {
    std::size_t col = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      auto gp = input_grad(self, p);
      if (!gp.empty()) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double * src = self.grad.data() + o * row + col;
          double * dst = gp.data() + o * widths[p];
          for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += src[i];
        }
      }
      col += widths[p];
    }
  });
}

Tensor slice(const Tensor & x, int axis, int begin, int end)
{
  axis = normalize_axis(axis, x.rank());
  const int n = x.shape()[axis];
  if (begin < 0 || end > n || begin >= end) {
    throw std::out_of_range(
      "slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
      shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  const std::size_t width = static_cast<std::size_t>(end - begin) * s.inner;
  const std::size_t offset = static_cast<std::size_t>(begin) * s.inner;
  const std::size_t row = s.n * s.inner;
  Shape shape = x.shape();
  shape[axis] = end - begin;
  Buffer out(s.outer * width);
  const auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + o * row + offset, width, out.data() + o * width);
  }
  return make_result(std::move(shape), std::move(out), {x}, [s, width, offset, row](Node & self) {
    auto gx = input_grad(self, 0);
    if (gx.empty()) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double * src = self.grad.data() + o * width;
      double * dst = gx.data() + o * row + offset;
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
  });
}

Tensor stack(const std::vector<Tensor> & parts, int axis)
{
  if (parts.empty()) throw std::invalid_argument("stack of no tensors");
  const Shape base = parts[0].shape();
  axis = normalize_axis(axis, static_cast<int>(base.size()) + 1);
  Shape expanded = base;
  expanded.insert(expanded.begin() + axis, 1);
  std::vector<Tensor> reshaped;
  reshaped.reserve(parts.size());
  for (const auto & p : parts) {
    if (p.shape() != base) throw std::invalid_argument("stack shape mismatch");
    reshaped.push_back(reshape(p, expanded));
  }
  return concat(reshaped, axis);
}

Tensor gather(const Tensor & x, std::vector<int> indices, const Shape & out_shape)
{
  if (indices.size() != numel(out_shape)) throw std::invalid_argument("gather shape mismatch");
  const auto xv = x.data();
  Buffer out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int k = indices[i];
    if (k < 0 || static_cast<std::size_t>(k) >= xv.size()) {
      throw std::out_of_range("gather index out of range");
    }
    out[i] = xv[static_cast<std::size_t>(k)];
  }
  auto idx = std::make_shared<std::vector<int>>(std::move(indices));
  return make_result(out_shape, std::move(out), {x}, [idx](Node & self) {
    auto gx = input_grad(self, 0);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < idx->size(); ++i) {
      gx[static_cast<std::size_t>((*idx)[i])] += self.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

namespace
{

struct ConvGeom
{
  int cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  int patch() const { return cin * kh * kw; }
  int pixels() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

void im2col(const double * x, const ConvGeom & g, double * cols)
{
  for (int c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        double * row = cols + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * g.pixels();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            row[oy * g.wo + ox] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                    ? x[(static_cast<std::size_t>(c) * g.h + iy) * g.w + ix]
                                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double * cols, const ConvGeom & g, double * x)
{
  for (int c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const double * row =
          cols + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * g.pixels();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.w) continue;
            x[(static_cast<std::size_t>(c) * g.h + iy) * g.w + ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor & x, const Tensor & weight, const Tensor & bias, int stride, int padding)
{
  if (x.rank() != 3 || weight.rank() != 4 || weight.dim(1) != x.dim(0)) {
    throw std::invalid_argument(
      "conv2d shape mismatch: x " + shape_str(x.shape()) + " weight " +
      shape_str(weight.shape()));
  }
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv2d stride/padding");
  ConvGeom g{};
  g.cin = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;
  if (g.ho <= 0 || g.wo <= 0) throw std::invalid_argument("conv2d output would be empty");
  const bool has_bias = bias.defined();
  if (has_bias && (bias.size() != static_cast<std::size_t>(g.cout))) {
    throw std::invalid_argument("conv2d bias size mismatch");
  }

  std::shared_ptr<Buffer> cols;
  const double * cols_ptr = x.data().data();
  if (!g.pointwise()) {
    cols = std::make_shared<Buffer>(static_cast<std::size_t>(g.patch()) * g.pixels());
    im2col(x.data().data(), g, cols->data());
    cols_ptr = cols->data();
  }
  Buffer out(static_cast<std::size_t>(g.cout) * g.pixels());
  MapMat o(out.data(), g.cout, g.pixels());
  o.noalias() = CMapMat(weight.data().data(), g.cout, g.patch()) *
                CMapMat(cols_ptr, g.patch(), g.pixels());
  if (has_bias) {
    const auto bv = bias.data();
    for (int c = 0; c < g.cout; ++c) o.row(c).array() += bv[static_cast<std::size_t>(c)];
  }

  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(
    {g.cout, g.ho, g.wo}, std::move(out), std::move(inputs), [g, cols, has_bias](Node & self) {
      CMapMat dout(self.grad.data(), g.cout, g.pixels());
      const double * cols_ptr = cols ? cols->data() : self.inputs[0]->value.data();
      auto gw = input_grad(self, 1);
      if (!gw.empty()) {
        MapMat(gw.data(), g.cout, g.patch()).noalias() +=
          dout * CMapMat(cols_ptr, g.patch(), g.pixels()).transpose();
      }
      if (has_bias) {
        auto gb = input_grad(self, 2);
        if (!gb.empty()) {
          for (int c = 0; c < g.cout; ++c) gb[static_cast<std::size_t>(c)] += dout.row(c).sum();
        }
      }
      auto gx = input_grad(self, 0);
      if (!gx.empty()) {
        CMapMat wmat(self.inputs[1]->value.data(), g.cout, g.patch());
        if (g.pointwise()) {
          MapMat(gx.data(), g.cin, g.pixels()).noalias() += wmat.transpose() * dout;
        } else {
          Buffer dcols(static_cast<std::size_t>(g.patch()) * g.pixels());
          MapMat(dcols.data(), g.patch(), g.pixels()).noalias() = wmat.transpose() * dout;
          col2im(dcols.data(), g, gx.data());
        }
      }
    });
}

// ---------------------------------------------------------------------------
// Bilinear sampling
// ---------------------------------------------------------------------------

namespace
{

struct BilinearTap
{
  std::size_t i00, i10, i01, i11;  // flat cell offsets (x-major within row y)
  double fx, fy;
  bool clamped_x, clamped_y;
};

BilinearTap bilinear_tap(double x, double y, int h, int w)
{
  BilinearTap t{};
  t.clamped_x = x < 0.0 || x > w - 1;
  t.clamped_y = y < 0.0 || y > h - 1;
  const double cx = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = w > 1 ? std::min(static_cast<int>(std::floor(cx)), w - 2) : 0;
  const int y0 = h > 1 ? std::min(static_cast<int>(std::floor(cy)), h - 2) : 0;
  const int x1 = w > 1 ? x0 + 1 : 0;
  const int y1 = h > 1 ? y0 + 1 : 0;
  t.fx = cx - x0;
  t.fy = cy - y0;
  t.i00 = static_cast<std::size_t>(y0) * w + x0;
  t.i10 = static_cast<std::size_t>(y0) * w + x1;
  t.i01 = static_cast<std::size_t>(y1) * w + x0;
  t.i11 = static_cast<std::size_t>(y1) * w + x1;
  return t;
}

}  // namespace

Tensor bilinear_sample(const Tensor & field, const Tensor & coords)
{
  if (field.rank() != 3 || coords.rank() != 2 || coords.dim(1) != 2) {
    throw std::invalid_argument(
      "bilinear_sample expects field [C,H,W] and coords [P,2], got " +
      shape_str(field.shape()) + " and " + shape_str(coords.shape()));
  }
  const int c = field.dim(0);
  const int h = field.dim(1);
  const int w = field.dim(2);
  const int p = coords.dim(0);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const auto fv = field.data();
  const auto qv = coords.data();
  for (double v : qv) {
    if (!std::isfinite(v)) throw std::domain_error("bilinear_sample: non-finite coordinate");
  }
  auto taps = std::make_shared<std::vector<BilinearTap>>(static_cast<std::size_t>(p));
  Buffer out(static_cast<std::size_t>(p) * c);
  for (int i = 0; i < p; ++i) {
    const BilinearTap t = bilinear_tap(qv[2 * i], qv[2 * i + 1], h, w);
    (*taps)[static_cast<std::size_t>(i)] = t;
    const double w00 = (1 - t.fx) * (1 - t.fy);
    const double w10 = t.fx * (1 - t.fy);
    const double w01 = (1 - t.fx) * t.fy;
    const double w11 = t.fx * t.fy;
    for (int ch = 0; ch < c; ++ch) {
      const double * f = fv.data() + ch * plane;
      out[static_cast<std::size_t>(i) * c + ch] =
        w00 * f[t.i00] + w10 * f[t.i10] + w01 * f[t.i01] + w11 * f[t.i11];
    }
  }
  return make_result({p, c}, std::move(out), {field, coords}, [taps, c, plane](Node & self) {
    auto gf = input_grad(self, 0);
    auto gq = input_grad(self, 1);
    const auto & fv = self.inputs[0]->value;
    for (std::size_t i = 0; i < taps->size(); ++i) {
      const BilinearTap & t = (*taps)[i];
      const double w00 = (1 - t.fx) * (1 - t.fy);
      const double w10 = t.fx * (1 - t.fy);
      const double w01 = (1 - t.fx) * t.fy;
      const double w11 = t.fx * t.fy;
      double dx = 0.0;
      double dy = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double g = self.grad[i * c + ch];
        const std::size_t off = ch * plane;
        if (!gf.empty()) {
          gf[off + t.i00] += g * w00;
          gf[off + t.i10] += g * w10;
          gf[off + t.i01] += g * w01;
          gf[off + t.i11] += g * w11;
        }
        const double f00 = fv[off + t.i00];
        const double f10 = fv[off + t.i10];
        const double f01 = fv[off + t.i01];
        const double f11 = fv[off + t.i11];
        dx += g * ((1 - t.fy) * (f10 - f00) + t.fy * (f11 - f01));
        dy += g * ((1 - t.fx) * (f01 - f00) + t.fx * (f11 - f10));
      }
      if (!gq.empty()) {
        if (!t.clamped_x) gq[2 * i] += dx;
        if (!t.clamped_y) gq[2 * i + 1] += dy;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Kernel scatter (normalized deconvolution without the renormalization)
// ---------------------------------------------------------------------------

Tensor scatter_kernel(const Tensor & mass, const Tensor & weights)
{
  if (weights.rank() != 3) throw std::invalid_argument("scatter_kernel weights must be [k*k,H,W]");
  const int taps = weights.dim(0);
  const int h = weights.dim(1);
  const int w = weights.dim(2);
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(taps))));
  if (k * k != taps || k % 2 == 0) {
    throw std::invalid_argument("scatter_kernel needs an odd square kernel, got " +
                                std::to_string(taps) + " taps");
  }
  if (mass.size() != static_cast<std::size_t>(h) * w) {
    throw std::invalid_argument("scatter_kernel mass size mismatch");
  }
  const int r = k / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const auto mv = mass.data();
  const auto wv = weights.data();
  Buffer out(plane, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t src = static_cast<std::size_t>(y) * w + x;
      const double m = mv[src];
      if (m == 0.0) continue;
      for (int dy = -r; dy <= r; ++dy) {
        const int ty = y + dy;
        if (ty < 0 || ty >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int tx = x + dx;
          if (tx < 0 || tx >= w) continue;
          const std::size_t tap = static_cast<std::size_t>((dy + r) * k + (dx + r));
          out[static_cast<std::size_t>(ty) * w + tx] += m * wv[tap * plane + src];
        }
      }
    }
  }
  return make_result({h, w}, std::move(out), {mass, weights}, [h, w, k, r, plane](Node & self) {
    auto gm = input_grad(self, 0);
    auto gw = input_grad(self, 1);
    const auto & mv = self.inputs[0]->value;
    const auto & wv = self.inputs[1]->value;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t src = static_cast<std::size_t>(y) * w + x;
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          const int ty = y + dy;
          if (ty < 0 || ty >= h) continue;
          for (int dx = -r; dx <= r; ++dx) {
            const int tx = x + dx;
            if (tx < 0 || tx >= w) continue;
            const std::size_t tap = static_cast<std::size_t>((dy + r) * k + (dx + r));
            const double g = self.grad[static_cast<std::size_t>(ty) * w + tx];
            acc += g * wv[tap * plane + src];
            if (!gw.empty()) gw[tap * plane + src] += g * mv[src];
          }
        }
        if (!gm.empty()) gm[src] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

Tensor attention(
  const Tensor & q, const Tensor & k, const Tensor & v, int heads,
  std::vector<double> * weights_out)
{
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3 || k.shape() != v.shape() ||
      q.dim(0) != k.dim(0) || q.dim(2) != k.dim(2)) {
    throw std::invalid_argument(
      "attention shape mismatch q " + shape_str(q.shape()) + " k " + shape_str(k.shape()) +
      " v " + shape_str(v.shape()));
  }
  const int groups = q.dim(0);
  const int lq = q.dim(1);
  const int lk = k.dim(1);
  const int d = q.dim(2);
  if (heads <= 0 || d % heads != 0) throw std::invalid_argument("attention heads must divide D");
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t amat = static_cast<std::size_t>(lq) * lk;
  auto att = std::make_shared<Buffer>(static_cast<std::size_t>(groups) * heads * amat);
  Buffer out(static_cast<std::size_t>(groups) * lq * d);
  const auto qv = q.data();
  const auto kv = k.data();
  const auto vv = v.data();
  for (int gi = 0; gi < groups; ++gi) {
    for (int hi = 0; hi < heads; ++hi) {
      const std::size_t qo = static_cast<std::size_t>(gi) * lq * d + hi * dh;
      const std::size_t ko = static_cast<std::size_t>(gi) * lk * d + hi * dh;
      CSMapMat qm(qv.data() + qo, lq, dh, Strided(d));
      CSMapMat km(kv.data() + ko, lk, dh, Strided(d));
      CSMapMat vm(vv.data() + ko, lk, dh, Strided(d));
      MapMat a(att->data() + (static_cast<std::size_t>(gi) * heads + hi) * amat, lq, lk);
      a.noalias() = (qm * km.transpose()) * scale;
      for (int r = 0; r < lq; ++r) {
        const double m = a.row(r).maxCoeff();
        a.row(r) = (a.row(r).array() - m).exp();
        a.row(r) /= a.row(r).sum();
      }
      SMapMat om(out.data() + qo, lq, dh, Strided(d));
      om.noalias() = a * vm;
    }
  }
  if (weights_out) weights_out->assign(att->begin(), att->end());
  return make_result(
    q.shape(), std::move(out), {q, k, v},
    [att, groups, heads, lq, lk, d, dh, scale, amat](Node & self) {
      auto gq = input_grad(self, 0);
      auto gk = input_grad(self, 1);
      auto gv = input_grad(self, 2);
      const auto & qv = self.inputs[0]->value;
      const auto & kv = self.inputs[1]->value;
      const auto & vv = self.inputs[2]->value;
      RowMat da(lq, lk);
      for (int gi = 0; gi < groups; ++gi) {
        for (int hi = 0; hi < heads; ++hi) {
          const std::size_t qo = static_cast<std::size_t>(gi) * lq * d + hi * dh;
          const std::size_t ko = static_cast<std::size_t>(gi) * lk * d + hi * dh;
          CMapMat a(att->data() + (static_cast<std::size_t>(gi) * heads + hi) * amat, lq, lk);
          CSMapMat dout(self.grad.data() + qo, lq, dh, Strided(d));
          CSMapMat vm(vv.data() + ko, lk, dh, Strided(d));
          if (!gv.empty()) {
            SMapMat(gv.data() + ko, lk, dh, Strided(d)).noalias() += a.transpose() * dout;
          }
          da.noalias() = dout * vm.transpose();
          // softmax backward, then undo the score scaling
          for (int r = 0; r < lq; ++r) {
            const double dot = (da.row(r).array() * a.row(r).array()).sum();
            da.row(r) = a.row(r).array() * (da.row(r).array() - dot) * scale;
          }
          if (!gq.empty()) {
            SMapMat(gq.data() + qo, lq, dh, Strided(d)).noalias() +=
              da * CSMapMat(kv.data() + ko, lk, dh, Strided(d));
          }
          if (!gk.empty()) {
            SMapMat(gk.data() + ko, lk, dh, Strided(d)).noalias() +=
              da.transpose() * CSMapMat(qv.data() + qo, lq, dh, Strided(d));
          }
        }
      }
    });
}

// ---------------------------------------------------------------------------
// Layer normalization
// ---------------------------------------------------------------------------

Tensor layer_norm(const Tensor & x, const Tensor & gain, const Tensor & bias, double eps)
{
  const int d = x.dim(-1);
  if (gain.size() != static_cast<std::size_t>(d) || bias.size() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("layer_norm gain/bias size mismatch");
  }
  const std::size_t rows = x.size() / static_cast<std::size_t>(d);
  auto xhat = std::make_shared<Buffer>(x.size());
  auto inv_std = std::make_shared<Buffer>(rows);
  Buffer out(x.size());
  const auto xv = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double * row = xv.data() + r * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += row[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int j = 0; j < d; ++j) {
      const double xh = (row[j] - mu) * is;
      (*xhat)[r * d + j] = xh;
      out[r * d + j] = xh * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias}, [xhat, inv_std, d, rows](Node & self) {
    auto gx = input_grad(self, 0);
    auto gg = input_grad(self, 1);
    auto gb = input_grad(self, 2);
    const auto & gv = self.inputs[1]->value;
    Buffer dxh(static_cast<std::size_t>(d));
    for (std::size_t r = 0; r < rows; ++r) {
      const double * dy = self.grad.data() + r * d;
      const double * xh = xhat->data() + r * d;
      double s1 = 0.0;
      double s2 = 0.0;
      for (int j = 0; j < d; ++j) {
        if (!gg.empty()) gg[j] += dy[j] * xh[j];
        if (!gb.empty()) gb[j] += dy[j];
        dxh[j] = dy[j] * gv[j];
        s1 += dxh[j];
        s2 += dxh[j] * xh[j];
      }
      if (!gx.empty()) {
        const double is = (*inv_std)[r];
        for (int j = 0; j < d; ++j) {
          gx[r * d + j] += is / d * (d * dxh[j] - s1 - xh[j] * s2);
        }
      }
    }
  });
}

}  // namespace gridplan::ag
