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

#include "gridplan/refinement.hpp"

#include "gridplan/log.hpp"
#include "gridplan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace gridplan
{

using ag::Tensor;

EncoderLayer::EncoderLayer(int d, int heads, int ffn, nn::Rng & rng)
: self_attn(d, heads, rng), norm1(d), norm2(d), ff1(d, ffn, rng), ff2(ffn, d, rng)
{
}

Tensor EncoderLayer::operator()(const Tensor & x, double p, bool training, nn::Rng & rng) const
{
  Tensor y = norm1(ag::add(x, nn::dropout(self_attn(x, x), p, training, rng)));
  const Tensor ff = nn::apply_last(ff2, nn::dropout(ag::relu(nn::apply_last(ff1, y)), p, training, rng));
  return norm2(ag::add(y, nn::dropout(ff, p, training, rng)));
}

void EncoderLayer::visit(const nn::ParamVisitor & f, const std::string & prefix)
{
  self_attn.visit(f, prefix + "self_attn.");
  norm1.visit(f, prefix + "norm1.");
  norm2.visit(f, prefix + "norm2.");
  ff1.visit(f, prefix + "ff1.");
  ff2.visit(f, prefix + "ff2.");
}

DecoderLayer::DecoderLayer(int d, int heads, int ffn, nn::Rng & rng)
: self_attn(d, heads, rng),
  cross_attn(d, heads, rng),
  norm1(d),
  norm2(d),
  norm3(d),
  ff1(d, ffn, rng),
  ff2(ffn, d, rng)
{
}

Tensor DecoderLayer::operator()(
  const Tensor & x, const Tensor & memory, double p, bool training, nn::Rng & rng) const
{
  Tensor y = norm1(ag::add(x, nn::dropout(self_attn(x, x), p, training, rng)));
  y = norm2(ag::add(y, nn::dropout(cross_attn(y, memory), p, training, rng)));
  const Tensor ff = nn::apply_last(ff2, nn::dropout(ag::relu(nn::apply_last(ff1, y)), p, training, rng));
  return norm3(ag::add(y, nn::dropout(ff, p, training, rng)));
}

void DecoderLayer::visit(const nn::ParamVisitor & f, const std::string & prefix)
{
  self_attn.visit(f, prefix + "self_attn.");
  cross_attn.visit(f, prefix + "cross_attn.");
  norm1.visit(f, prefix + "norm1.");
  norm2.visit(f, prefix + "norm2.");
  norm3.visit(f, prefix + "norm3.");
  ff1.visit(f, prefix + "ff1.");
  ff2.visit(f, prefix + "ff2.");
}

RefinementNetwork::RefinementNetwork(const RefinementConfig & config, nn::Rng & rng) : config_(config)
{
  if (config.k < 1 || config.t_f < 1 || config.d_model % config.heads != 0) {
    throw std::invalid_argument("RefinementNetwork: invalid configuration");
  }
  const int d = config.d_model;
  traj_embed_ = nn::Linear(2 * config.t_f, d, rng);
  motion_embed_ = nn::Linear(config.motion_hidden, d, rng);
  queries_ = nn::uniform_param({config.k, d}, 1.0, rng);
  for (int l = 0; l < config.layers; ++l) {
    encoder_.emplace_back(d, config.heads, config.ffn, rng);
    decoder_.emplace_back(d, config.heads, config.ffn, rng);
  }
  out_ = nn::Linear(d, 2 * config.t_f, rng);
}

Tensor RefinementNetwork::operator()(
  const Tensor & samples, const Tensor & m0, bool training, nn::Rng & rng) const
{
  const int width = 2 * config_.t_f;
  if (samples.rank() != 3 || samples.dim(2) != width) {
    throw std::invalid_argument(
      "RefinementNetwork: samples must be [S, C, " + std::to_string(width) + "], got " +
      ag::shape_str(samples.shape()));
  }
  if (samples.dim(1) == 0) throw std::invalid_argument("RefinementNetwork: empty sample set");
  const int s = samples.dim(0);
  if (m0.rank() != 2 || m0.dim(0) != s || m0.dim(1) != config_.motion_hidden) {
    throw std::invalid_argument("RefinementNetwork: m0 must be [S, motion_hidden]");
  }
  const double p = config_.dropout;
  Tensor memory = nn::apply_last(traj_embed_, ag::mul_scalar(samples, 1.0 / config_.position_scale));
  for (const EncoderLayer & layer : encoder_) memory = layer(memory, p, training, rng);

  const Tensor motion = ag::reshape(motion_embed_(m0), {s, 1, config_.d_model});
  Tensor x = ag::add(motion, ag::reshape(queries_, {1, config_.k, config_.d_model}));
  for (const DecoderLayer & layer : decoder_) x = layer(x, memory, p, training, rng);
  return ag::mul_scalar(nn::apply_last(out_, x), config_.position_scale);
}

Tensor RefinementNetwork::operator()(const Tensor & samples, const Tensor & m0) const
{
  nn::Rng unused(0);
  return (*this)(samples, m0, false, unused);
}

void RefinementNetwork::visit(const nn::ParamVisitor & f, const std::string & prefix)
{
  traj_embed_.visit(f, prefix + "traj_embed.");
  motion_embed_.visit(f, prefix + "motion_embed.");
  f(prefix + "queries", queries_);
  for (std::size_t l = 0; l < encoder_.size(); ++l) encoder_[l].visit(f, prefix + "enc" + std::to_string(l) + ".");
  for (std::size_t l = 0; l < decoder_.size(); ++l) decoder_[l].visit(f, prefix + "dec" + std::to_string(l) + ".");
  out_.visit(f, prefix + "out.");
}

namespace
{

double sq_dist(const std::vector<double> & a, const std::vector<double> & b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

KMeansResult kmeans(
  const std::vector<std::vector<double>> & points, int k, nn::Rng & rng, int max_iter, double tol)
{
  const int n = static_cast<int>(points.size());
  if (k < 1 || n < k) {
    throw std::invalid_argument(
      "kmeans: need at least k = " + std::to_string(k) + " points, got " + std::to_string(n));
  }
  KMeansResult res;
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<int> first(0, n - 1);
  res.centroids.push_back(points[static_cast<std::size_t>(first(rng))]);
  bool collapsed = false;
  while (static_cast<int>(res.centroids.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points[i], res.centroids.back()));
      total += d2[i];
    }
    int pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double r = u(rng);
      double cum = 0.0;
      pick = -1;
      for (int i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > r) break;
      }
    } else {
      collapsed = true;
      pick = static_cast<int>(std::min_element(d2.begin(), d2.end()) - d2.begin());
    }
    res.centroids.push_back(points[static_cast<std::size_t>(pick)]);
  }
  if (collapsed) {
    log::warn("kmeans: fewer distinct points than k; padding with duplicated samples");
  }

  const std::size_t dim = points.front().size();
  res.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < max_iter; ++it) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(points[i], res.centroids[c]);
        if (d < best) {
          best = d;
          res.assignment[i] = c;
        }
      }
    }
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      ++counts[res.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[res.assignment[i]][j] += points[i][j];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (double & v : sums[c]) v /= counts[c];
      shift = std::max(shift, std::sqrt(sq_dist(sums[c], res.centroids[c])));
      res.centroids[c] = std::move(sums[c]);
    }
    double wcss = 0.0;
    for (int i = 0; i < n; ++i) wcss += sq_dist(points[i], res.centroids[res.assignment[i]]);
    res.objective.push_back(wcss);
    res.iterations = it + 1;
    if (shift < tol) break;
  }
  return res;
}

}  // namespace gridplan
