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

#include "gridplan/model.hpp"

#include "gridplan/checkpoint.hpp"
#include "gridplan/ops.hpp"

#include <sstream>
#include <stdexcept>

namespace gridplan
{

using ag::Tensor;

void ModelConfig::validate() const
{
  auto positive = [](const char * name, double v) {
    if (!(v > 0)) throw std::invalid_argument(std::string("model.") + name + " must be positive");
  };
  positive("grid_size", grid_size);
  positive("crop_extent", crop_extent);
  positive("horizon", horizon);
  positive("t_f", t_f);
  positive("raster_size", raster_size);
  positive("scene_width1", scene_width1);
  positive("scene_width2", scene_width2);
  positive("scene_channels", scene_channels);
  positive("pooling_cells", pooling_cells);
  positive("hidden", hidden);
  positive("heads", heads);
  positive("ogm_hidden", ogm_hidden);
  positive("ogm_layers", ogm_layers);
  positive("deconv_k", deconv_k);
  positive("reward_hidden", reward_hidden);
  positive("refine_d_model", refine_d_model);
  positive("refine_heads", refine_heads);
  positive("refine_layers", refine_layers);
  positive("refine_ffn", refine_ffn);
  positive("k", k);
  if (t_p < 2) throw std::invalid_argument("model.t_p must be at least 2");
  if (deconv_k % 2 == 0) throw std::invalid_argument("model.deconv_k must be odd");
  if (hidden % heads != 0) throw std::invalid_argument("model.hidden must be divisible by model.heads");
  if (refine_d_model % refine_heads != 0) {
    throw std::invalid_argument("model.refine_d_model must be divisible by model.refine_heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model.dropout must be in [0, 1)");
  const int ratio = raster_size / grid_size;
  if (raster_size % grid_size != 0 || (ratio != 1 && ratio != 2 && ratio != 4 && ratio != 8)) {
    throw std::invalid_argument("model.raster_size must be grid_size times 1, 2, 4 or 8");
  }
}

std::string ModelConfig::canonical() const
{
  std::ostringstream s;
  s.precision(17);
  s << "grid_size=" << grid_size << ";crop_extent=" << crop_extent << ";horizon=" << horizon << ";t_p=" << t_p
    << ";t_f=" << t_f << ";raster_size=" << raster_size << ";scene_width1=" << scene_width1
    << ";scene_width2=" << scene_width2 << ";scene_channels=" << scene_channels << ";pooling_cells=" << pooling_cells
    << ";hidden=" << hidden << ";heads=" << heads << ";ogm_hidden=" << ogm_hidden << ";ogm_layers=" << ogm_layers
    << ";deconv_k=" << deconv_k << ";ogm_variant=" << to_string(ogm_variant) << ";reward_hidden=" << reward_hidden
    << ";reward_variant=" << to_string(reward_variant) << ";refine_d_model=" << refine_d_model
    << ";refine_heads=" << refine_heads << ";refine_layers=" << refine_layers << ";refine_ffn=" << refine_ffn
    << ";k=" << k;
  return s.str();
}

std::uint64_t ModelConfig::fingerprint() const { return fnv1a(canonical()); }

const char * to_string(ParamGroup g)
{
  switch (g) {
    case ParamGroup::kEncoder: return "encoder";
    case ParamGroup::kOGM: return "ogm";
    case ParamGroup::kPolicy: return "policy";
    case ParamGroup::kDecoder: return "decoder";
    case ParamGroup::kRefinement: return "refinement";
  }
  return "?";
}

Tensor SampleSet::relative(Vec2 origin) const
{
  const int c = count();
  const int t_f = static_cast<int>(rollout.positions.size());
  const Tensor stacked = ag::reshape(ag::stack(rollout.positions, 1), {1, c, 2 * t_f});
  std::vector<double> o(static_cast<std::size_t>(2 * t_f));
  for (int t = 0; t < t_f; ++t) {
    o[2 * t] = origin.x;
    o[2 * t + 1] = origin.y;
  }
  return ag::sub(stacked, Tensor::from(std::move(o), {2 * t_f}));
}

std::vector<Trajectory> SampleSet::trajectories() const
{
  const int c = count();
  std::vector<Trajectory> out(static_cast<std::size_t>(c));
  for (const Tensor & p : rollout.positions) {
    for (int i = 0; i < c; ++i) out[i].push_back({p[2 * i], p[2 * i + 1]});
  }
  return out;
}

GridPlanModel::GridPlanModel(const ModelConfig & config, std::uint64_t seed) : config_(config)
{
  config.validate();
  nn::Rng rng(seed);
  const int motion_channels = config.hidden + 2;
  scene_ = SceneEncoder(
    3, config.raster_size, config.grid_size, {config.scene_width1, config.scene_width2}, config.scene_channels, rng);
  motion_ = MotionEncoder(PoolingSpec{config.pooling_cells, config.crop_extent}, config.hidden, rng);
  OGMConfig oc;
  oc.grid_size = config.grid_size;
  oc.scene_channels = config.scene_channels;
  oc.motion_channels = motion_channels;
  oc.hidden = config.ogm_hidden;
  oc.layers = config.ogm_layers;
  oc.kernel = config.deconv_k;
  oc.variant = config.ogm_variant;
  ogm_ = OGMDecoder(oc, rng);
  policy_ = PolicyNetwork(
    config.scene_channels, motion_channels, config.reward_hidden, config.horizon, config.reward_variant, rng);
  DecoderConfig dc;
  dc.scene_channels = config.scene_channels;
  dc.reward_hidden = config.reward_hidden;
  dc.ogm_hidden = config.ogm_hidden;
  dc.motion_hidden = config.hidden;
  dc.hidden = config.hidden;
  dc.heads = config.heads;
  decoder_ = TrajectoryDecoder(dc, rng);
  RefinementConfig rc;
  rc.t_f = config.t_f;
  rc.motion_hidden = config.hidden;
  rc.d_model = config.refine_d_model;
  rc.heads = config.refine_heads;
  rc.layers = config.refine_layers;
  rc.ffn = config.refine_ffn;
  rc.k = config.k;
  rc.dropout = config.dropout;
  refinement_ = RefinementNetwork(rc, rng);
}

Encoding GridPlanModel::encode(const ScenarioObservation & obs) const
{
  if (static_cast<int>(obs.history.size()) != config_.t_p) {
    throw std::invalid_argument(
      "scenario " + obs.id + ": expected " + std::to_string(config_.t_p) + " history points, got " +
      std::to_string(obs.history.size()));
  }
  Encoding e;
  e.spec = obs.grid(config_.grid_size, config_.crop_extent);
  e.scene = scene_(obs.raster.tensor());
  e.motion = motion_(obs, e.spec);
  e.motion_input = e.motion.embedding_input(config_.crop_extent);
  return e;
}

OGMSequence GridPlanModel::ogms(const Encoding & enc) const
{
  return ogm_(enc.scene, enc.motion_input, config_.t_f, enc.spec);
}

PolicyOutput GridPlanModel::policy(const Encoding & enc) const
{
  PolicyOutput out;
  out.rewards = policy_.reward_head(enc.scene, enc.motion_input);
  out.policy = policy_.policy(out.rewards, mdp(enc.spec));
  return out;
}

DecoderContext GridPlanModel::context(const Encoding & enc, const PolicyOutput & pol, const OGMSequence & ogms) const
{
  DecoderContext ctx;
  ctx.spec = enc.spec;
  ctx.scene = enc.scene;
  ctx.reward_hidden = pol.rewards.hidden;
  ctx.ogm_hidden = ogms.hidden;
  ctx.m0 = enc.motion.m0;
  return ctx;
}

Rollout GridPlanModel::teacher_forced(
  const DecoderContext & ctx, const Plan & gt_plan, std::span<const Vec2> future) const
{
  return decoder_.teacher_forced(decoder_.encode_plan(plan_state_tensors(gt_plan), ctx), ctx, future);
}

SampleSet GridPlanModel::sample(
  const DecoderContext & ctx, const PolicyOutput & pol, int count, double tau, nn::Rng & rng) const
{
  if (count < 1) throw std::invalid_argument("sample: count must be positive");
  SampleSet s;
  const auto fields = policy_fields(pol.policy.log_pi, config_.grid_size);
  s.plans = sample_plan(fields, center_states(ctx.spec, count), tau, rng);
  s.rollout = decoder_.sampled(decoder_.encode_plan(s.plans.states, ctx), ctx, config_.t_f, rng);
  return s;
}

Tensor GridPlanModel::refine(const Tensor & relative_samples, const Encoding & enc, bool training, nn::Rng & rng) const
{
  return refinement_(relative_samples, enc.motion.m0, training, rng);
}

void GridPlanModel::visit(ParamGroup group, const nn::ParamVisitor & f)
{
  switch (group) {
    case ParamGroup::kEncoder:
      scene_.visit(f, "scene_encoder.");
      motion_.visit(f, "motion_encoder.");
      break;
    case ParamGroup::kOGM: ogm_.visit(f, "ogm."); break;
    case ParamGroup::kPolicy: policy_.visit(f, "policy."); break;
    case ParamGroup::kDecoder: decoder_.visit(f, "decoder."); break;
    case ParamGroup::kRefinement: refinement_.visit(f, "refinement."); break;
  }
}

void GridPlanModel::visit(const nn::ParamVisitor & f)
{
  for (ParamGroup g :
       {ParamGroup::kEncoder, ParamGroup::kOGM, ParamGroup::kPolicy, ParamGroup::kDecoder, ParamGroup::kRefinement}) {
    visit(g, f);
  }
}

nn::NamedParams GridPlanModel::parameters()
{
  nn::NamedParams out;
  visit([&](const std::string & name, Tensor & t) { out.emplace_back(name, t); });
  return out;
}

std::vector<Tensor> GridPlanModel::parameters(const std::vector<ParamGroup> & groups)
{
  std::vector<Tensor> out;
  for (ParamGroup g : groups) visit(g, [&](const std::string &, Tensor & t) { out.push_back(t); });
  return out;
}

void GridPlanModel::set_trainable(ParamGroup group, bool trainable)
{
  visit(group, [&](const std::string &, Tensor & t) { t.set_requires_grad(trainable); });
}

Tensor center_states(const GridSpec & spec, int batch)
{
  return Tensor::full({batch, 2}, spec.center());
}

}  // namespace gridplan
