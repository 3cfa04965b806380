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

#include "gridplan/decoder.hpp"

#include "gridplan/ops.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace gridplan
{

using ag::Tensor;

GaussianStep gaussian_from_raw(const Tensor & raw, const Tensor & prev)
{
  if (raw.rank() != 2 || raw.dim(1) != 5) {
    throw std::invalid_argument("gaussian_from_raw: expected [B, 5], got " + ag::shape_str(raw.shape()));
  }
  GaussianStep s;
  s.offset = ag::slice(raw, 1, 0, 2);
  s.mean = ag::add(prev, s.offset);
  s.sigma = ag::clamp(ag::exp(ag::slice(raw, 1, 2, 4)), kSigmaMin, kSigmaMax);
  s.rho = ag::mul_scalar(ag::tanh(ag::slice(raw, 1, 4, 5)), kRhoBound);
  return s;
}

Tensor gaussian_nll(const GaussianStep & step, const Tensor & y)
{
  const int b = step.mean.dim(0);
  const Tensor u = ag::div(ag::sub(y, step.mean), step.sigma);
  const Tensor ux = ag::slice(u, 1, 0, 1);
  const Tensor uy = ag::slice(u, 1, 1, 2);
  const Tensor one_minus = ag::add_scalar(ag::neg(ag::square(step.rho)), 1.0);
  const Tensor quad = ag::sub(ag::add(ag::square(ux), ag::square(uy)), ag::mul_scalar(ag::mul(step.rho, ag::mul(ux, uy)), 2.0));
  const Tensor nll = ag::add(
    ag::add(ag::sum_axis(ag::log(step.sigma), 1, true), ag::mul_scalar(ag::log(one_minus), 0.5)),
    ag::div(quad, ag::mul_scalar(one_minus, 2.0)));
  return ag::reshape(ag::add_scalar(nll, std::log(2.0 * std::numbers::pi)), {b});
}

Tensor gaussian_sample(const GaussianStep & step, std::span<const double> z)
{
  const int b = step.mean.dim(0);
  if (z.size() != static_cast<std::size_t>(2 * b)) {
    throw std::invalid_argument("gaussian_sample: expected 2 standard normals per row");
  }
  const Tensor zt = Tensor::from(std::vector<double>(z.begin(), z.end()), {b, 2});
  const Tensor zx = ag::slice(zt, 1, 0, 1);
  const Tensor zy = ag::slice(zt, 1, 1, 2);
  const Tensor sx = ag::slice(step.sigma, 1, 0, 1);
  const Tensor sy = ag::slice(step.sigma, 1, 1, 2);
  const Tensor root = ag::sqrt(ag::add_scalar(ag::neg(ag::square(step.rho)), 1.0));
  const Tensor dx = ag::mul(sx, zx);
  const Tensor dy = ag::mul(sy, ag::add(ag::mul(step.rho, zx), ag::mul(root, zy)));
  return ag::add(step.mean, ag::concat({dx, dy}, 1));
}

std::vector<double> normal_noise(std::size_t count, nn::Rng & rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> z(count);
  for (double & v : z) v = n(rng);
  return z;
}

RolloutMode parse_rollout_mode(const std::string & name)
{
  if (name == "teacher_forced") return RolloutMode::kTeacherForced;
  if (name == "sampled") return RolloutMode::kSampled;
  throw std::invalid_argument("unknown rollout mode '" + name + "'");
}

TrajectoryDecoder::TrajectoryDecoder(const DecoderConfig & config, nn::Rng & rng) : config_(config)
{
  const int h = config.hidden;
  plan_embed_ = nn::Linear(2 + config.scene_channels + config.reward_hidden, h, rng);
  plan_rnn_ = nn::GRUCell(h, h, rng);
  h0_embed_ = nn::Linear(config.motion_hidden, h, rng);
  attention_ = nn::MultiHeadAttention(h, config.heads, rng);
  step_embed_ = nn::Linear(h + 2 + config.scene_channels + config.ogm_hidden, h, rng);
  step_rnn_ = nn::GRUCell(h, h, rng);
  out_ = nn::Linear(h, 5, rng);
}

Tensor TrajectoryDecoder::lookup(const Tensor & map, const Tensor & grid_points) const
{
  return ag::bilinear_sample(map, grid_points);
}

PlanFeatures TrajectoryDecoder::encode_plan(
  const std::vector<Tensor> & states, const DecoderContext & ctx) const
{
  if (states.empty() || states.size() != ctx.reward_hidden.size()) {
    throw std::invalid_argument(
      "encode_plan: plan has " + std::to_string(states.size()) + " states but " +
      std::to_string(ctx.reward_hidden.size()) + " reward hidden maps were given");
  }
  const int b = states.front().dim(0);
  const double c = ctx.spec.center() > 0.0 ? ctx.spec.center() : 1.0;
  Tensor h = Tensor::zeros({b, config_.hidden});
  std::vector<Tensor> feats;
  feats.reserve(states.size());
  for (std::size_t n = 0; n < states.size(); ++n) {
    const Tensor & s = states[n];
    const Tensor pos = ag::mul_scalar(ag::add_scalar(s, -c), 1.0 / c);
    const Tensor x = ag::concat({pos, lookup(ctx.scene, s), lookup(ctx.reward_hidden[n], s)}, 1);
    h = plan_rnn_(ag::relu(plan_embed_(x)), h);
    feats.push_back(h);
  }
  return {ag::stack(feats, 1)};
}

Tensor TrajectoryDecoder::attend(
  const Tensor & h_prev, const PlanFeatures & plan, std::vector<double> * weights) const
{
  const int b = h_prev.dim(0);
  const Tensor q = ag::reshape(h_prev, {b, 1, config_.hidden});
  return ag::reshape(attention_(q, plan.features, weights), {b, config_.hidden});
}

Tensor TrajectoryDecoder::initial_state(const DecoderContext & ctx, int batch) const
{
  const Tensor h0 = ag::tanh(h0_embed_(ctx.m0));
  return ag::matmul(Tensor::full({batch, 1}, 1.0), h0);
}

std::pair<Tensor, GaussianStep> TrajectoryDecoder::decode_step(
  const Tensor & h_prev, const Tensor & a_t, const Tensor & prev_pos, int t,
  const DecoderContext & ctx) const
{
  if (t < 0 || t >= static_cast<int>(ctx.ogm_hidden.size())) {
    throw std::out_of_range("decode_step: no OGM hidden map for step " + std::to_string(t));
  }
  const Tensor grid = world_to_grid(prev_pos, ctx.spec);
  const Tensor local = ag::mul_scalar(
    ag::sub(prev_pos, Tensor::from({ctx.spec.origin.x, ctx.spec.origin.y}, {1, 2})),
    2.0 / ctx.spec.crop_extent);
  const Tensor x = ag::concat(
    {a_t, local, lookup(ctx.scene, grid), lookup(ctx.ogm_hidden[static_cast<std::size_t>(t)], grid)}, 1);
  const Tensor h = step_rnn_(ag::relu(step_embed_(x)), h_prev);
  return {h, gaussian_from_raw(out_(h), prev_pos)};
}

Rollout TrajectoryDecoder::teacher_forced(
  const PlanFeatures & plan, const DecoderContext & ctx, std::span<const Vec2> future) const
{
  const int b = plan.batch();
  Rollout r;
  Tensor h = initial_state(ctx, b);
  Tensor prev = ag::matmul(Tensor::full({b, 1}, 1.0), Tensor::from({ctx.spec.origin.x, ctx.spec.origin.y}, {1, 2}));
  for (std::size_t t = 0; t < future.size(); ++t) {
    const Tensor a = attend(h, plan);
    auto [h_next, step] = decode_step(h, a, prev, static_cast<int>(t), ctx);
    h = h_next;
    const Tensor y = ag::matmul(Tensor::full({b, 1}, 1.0), Tensor::from({future[t].x, future[t].y}, {1, 2}));
    const Tensor nll = gaussian_nll(step, y);
    r.nll = t == 0 ? nll : ag::add(r.nll, nll);
    r.steps.push_back(step);
    r.positions.push_back(y);
    prev = y;
  }
  return r;
}

Rollout TrajectoryDecoder::sampled(
  const PlanFeatures & plan, const DecoderContext & ctx, int t_f, std::span<const double> z) const
{
  const int b = plan.batch();
  if (z.size() != static_cast<std::size_t>(t_f) * b * 2) {
    throw std::invalid_argument("sampled: expected t_f * B * 2 standard normals");
  }
  Rollout r;
  Tensor h = initial_state(ctx, b);
  Tensor prev = ag::matmul(Tensor::full({b, 1}, 1.0), Tensor::from({ctx.spec.origin.x, ctx.spec.origin.y}, {1, 2}));
  for (int t = 0; t < t_f; ++t) {
    const Tensor a = attend(h, plan);
    auto [h_next, step] = decode_step(h, a, prev, t, ctx);
    h = h_next;
    prev = gaussian_sample(step, z.subspan(static_cast<std::size_t>(t) * b * 2, static_cast<std::size_t>(b) * 2));
    r.steps.push_back(step);
    r.positions.push_back(prev);
  }
  return r;
}

Rollout TrajectoryDecoder::sampled(
  const PlanFeatures & plan, const DecoderContext & ctx, int t_f, nn::Rng & rng) const
{
  const auto z = normal_noise(static_cast<std::size_t>(t_f) * plan.batch() * 2, rng);
  return sampled(plan, ctx, t_f, z);
}

void TrajectoryDecoder::visit(const nn::ParamVisitor & f, const std::string & prefix)
{
  plan_embed_.visit(f, prefix + "plan_embed.");
  plan_rnn_.visit(f, prefix + "plan_rnn.");
  h0_embed_.visit(f, prefix + "h0_embed.");
  attention_.visit(f, prefix + "attention.");
  step_embed_.visit(f, prefix + "step_embed.");
  step_rnn_.visit(f, prefix + "step_rnn.");
  out_.visit(f, prefix + "out.");
}

}  // namespace gridplan
