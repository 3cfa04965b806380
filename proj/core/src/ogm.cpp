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

#include "gridplan/ogm.hpp"

#include "gridplan/ops.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace gridplan
{

using ag::Tensor;

GridField OGMSequence::field(int t) const
{
  return GridField::from_tensor(
    ag::reshape(maps.at(static_cast<std::size_t>(t)), {1, spec.grid_size, spec.grid_size}), spec);
}

Tensor normalized_deconv_step(
  const Tensor & o_prev, const Tensor & kernel_logits, double * scale, double tol)
{
  if (kernel_logits.rank() != 3) {
    throw std::invalid_argument("normalized_deconv_step: kernel logits must be [k*k, G, G]");
  }
  const int g = kernel_logits.dim(1);
  if (kernel_logits.dim(2) != g || static_cast<int>(o_prev.size()) != g * g) {
    throw std::invalid_argument(
      "normalized_deconv_step: map " + ag::shape_str(o_prev.shape()) + " does not match kernel logits " +
      ag::shape_str(kernel_logits.shape()));
  }
  double total = 0.0;
  for (double v : o_prev.data()) {
    if (!(v >= -tol)) throw std::domain_error("normalized_deconv_step: negative or non-finite mass");
    total += v;
  }
  if (std::abs(total - 1.0) > tol) {
    throw std::domain_error(
      "normalized_deconv_step: previous map sums to " + std::to_string(total) + ", expected 1");
  }
  const Tensor weights = ag::softmax(kernel_logits, 0);
  const Tensor scattered = ag::scatter_kernel(ag::reshape(o_prev, {g, g}), weights);
  const Tensor kept = ag::sum(scattered);
  if (scale != nullptr) *scale = 1.0 / kept.item();
  return ag::div(scattered, kept);
}

GridField normalized_deconv_step(const GridField & o_prev, const GridField & kernel_logits)
{
  ag::NoGradGuard guard;
  const Tensor out = normalized_deconv_step(o_prev.tensor(), kernel_logits.tensor());
  return GridField::from_tensor(ag::reshape(out, {1, o_prev.spec.grid_size, o_prev.spec.grid_size}), o_prev.spec);
}

OGMVariant parse_ogm_variant(const std::string & name)
{
  if (name == "deconv") return OGMVariant::kDeconv;
  if (name == "convlstm_direct") return OGMVariant::kConvLSTMDirect;
  if (name == "cnn_static") return OGMVariant::kCNNStatic;
  throw std::invalid_argument("unknown OGM variant '" + name + "'");
}

std::string to_string(OGMVariant v)
{
  switch (v) {
    case OGMVariant::kDeconv: return "deconv";
    case OGMVariant::kConvLSTMDirect: return "convlstm_direct";
    case OGMVariant::kCNNStatic: return "cnn_static";
  }
  return "?";
}

OGMDecoder::OGMDecoder(const OGMConfig & config, nn::Rng & rng) : config_(config)
{
  if (config.grid_size <= 0 || config.hidden <= 0 || config.layers <= 0 || config.kernel <= 0 ||
      config.kernel % 2 == 0) {
    throw std::invalid_argument("OGMDecoder: invalid configuration");
  }
  const int g = config.grid_size;
  const double c = std::round(0.5 * (g - 1));
  std::vector<double> logits(static_cast<std::size_t>(g * g));
  for (int iy = 0; iy < g; ++iy) {
    for (int ix = 0; ix < g; ++ix) {
      logits[iy * g + ix] = -0.5 * ((ix - c) * (ix - c) + (iy - c) * (iy - c));
    }
  }
  o0_logits_ = Tensor::from(std::move(logits), {g, g}, true);

  if (config.variant == OGMVariant::kCNNStatic) {
    embed_.emplace_back(config.motion_channels, config.hidden, 1, 1, 0, rng);
    static_ = nn::Conv2d(config.scene_channels + config.hidden, config.hidden, 3, 1, 1, rng);
    head_ = nn::Conv2d(config.hidden, 1, 1, 1, 0, rng);
    return;
  }
  for (int l = 0; l < config.layers; ++l) {
    embed_.emplace_back(config.motion_channels, config.hidden, 1, 1, 0, rng);
    cells_.emplace_back(l == 0 ? config.scene_channels : config.hidden, config.hidden, 3, rng);
  }
  const int out = config.variant == OGMVariant::kDeconv ? config.kernel * config.kernel : 1;
  head_ = nn::Conv2d(config.hidden, out, 1, 1, 0, rng);
}

Tensor OGMDecoder::initial_map() const
{
  const int g = config_.grid_size;
  return ag::reshape(ag::softmax(ag::reshape(o0_logits_, {g * g}), 0), {g, g});
}

OGMSequence OGMDecoder::operator()(
  const Tensor & scene, const Tensor & motion, int t_f, const GridSpec & spec) const
{
  if (t_f <= 0) throw std::invalid_argument("OGMDecoder: t_f must be positive");
  const int g = config_.grid_size;
  if (spec.grid_size != g || scene.rank() != 3 || scene.dim(0) != config_.scene_channels ||
      scene.dim(1) != g || scene.dim(2) != g || motion.rank() != 3 ||
      motion.dim(0) != config_.motion_channels) {
    throw std::invalid_argument(
      "OGMDecoder: unexpected inputs " + ag::shape_str(scene.shape()) + " / " +
      ag::shape_str(motion.shape()));
  }
  OGMSequence seq;
  seq.spec = spec;
  seq.o0 = initial_map();
  auto cell_softmax = [g](const Tensor & logits) {
    return ag::reshape(ag::softmax(ag::reshape(logits, {g * g}), 0), {g, g});
  };

  if (config_.variant == OGMVariant::kCNNStatic) {
    const Tensor h = ag::relu(static_(ag::concat({scene, embed_[0](motion)}, 0)));
    const Tensor map = cell_softmax(head_(h));
    for (int t = 0; t < t_f; ++t) {
      seq.maps.push_back(map);
      seq.hidden.push_back(h);
    }
    return seq;
  }

  std::vector<nn::ConvLSTMState> states;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    states.push_back({embed_[l](motion), Tensor::zeros({config_.hidden, g, g})});
  }
  const Tensor scene_gates = cells_[0].input_gates(scene);
  Tensor o = seq.o0;
  for (int t = 0; t < t_f; ++t) {
    states[0] = cells_[0].step(scene_gates, states[0]);
    for (std::size_t l = 1; l < cells_.size(); ++l) {
      states[l] = cells_[l].step(cells_[l].input_gates(states[l - 1].h), states[l]);
    }
    const Tensor & top = states.back().h;
    if (config_.variant == OGMVariant::kDeconv) {
      double scale = 1.0;
      o = normalized_deconv_step(o, head_(top), &scale);
      seq.scales.push_back(scale);
    } else {
      o = cell_softmax(head_(top));
    }
    seq.maps.push_back(o);
    seq.hidden.push_back(top);
  }
  return seq;
}

void OGMDecoder::visit(const nn::ParamVisitor & f, const std::string & prefix)
{
  f(prefix + "o0_logits", o0_logits_);
  for (std::size_t l = 0; l < embed_.size(); ++l) embed_[l].visit(f, prefix + "embed" + std::to_string(l) + ".");
  for (std::size_t l = 0; l < cells_.size(); ++l) cells_[l].visit(f, prefix + "cell" + std::to_string(l) + ".");
  if (config_.variant == OGMVariant::kCNNStatic) static_.visit(f, prefix + "static.");
  head_.visit(f, prefix + "head.");
}

Tensor ogm_log_likelihood(
  const std::vector<Tensor> & maps, const std::vector<Tensor> & grid_points, double eps)
{
  if (maps.empty() || maps.size() != grid_points.size()) {
    throw std::invalid_argument("ogm_log_likelihood: one point set per map required");
  }
  Tensor total;
  for (std::size_t t = 0; t < maps.size(); ++t) {
    const int g = maps[t].dim(0);
    const int b = grid_points[t].dim(0);
    const Tensor p = ag::bilinear_sample(ag::reshape(maps[t], {1, g, g}), grid_points[t]);
    const Tensor term = ag::reshape(ag::log(ag::add_scalar(p, eps)), {b});
    total = t == 0 ? term : ag::add(total, term);
  }
  return total;
}

Tensor ogm_nll(const OGMSequence & ogms, std::span<const Vec2> future, double eps)
{
  if (static_cast<int>(future.size()) != ogms.steps()) {
    throw std::invalid_argument("ogm_nll: future length does not match the number of maps");
  }
  std::vector<Tensor> pts;
  for (const Vec2 & y : future) {
    const Vec2 q = world_to_grid(y, ogms.spec);
    pts.push_back(Tensor::from({q.x, q.y}, {1, 2}));
  }
  return ag::neg(ag::sum(ogm_log_likelihood(ogms.maps, pts, eps)));
}

void write_ogm_dump(std::ostream & out, const OGMSequence & ogms)
{
  const int g = ogms.spec.grid_size;
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  out << "gridplan-ogm 1 " << g << ' ' << ogms.steps() << ' ' << num(ogms.spec.crop_extent) << ' '
      << num(ogms.spec.origin.x) << ' ' << num(ogms.spec.origin.y) << '\n';
  for (const Tensor & m : ogms.maps) {
    const auto v = m.data();
    for (int iy = 0; iy < g; ++iy) {
      for (int ix = 0; ix < g; ++ix) out << (ix ? " " : "") << num(v[iy * g + ix]);
      out << '\n';
    }
  }
}

OGMSequence read_ogm_dump(std::istream & in)
{
  std::string magic;
  int version = 0, g = 0, steps = 0;
  OGMSequence seq;
  if (!(in >> magic >> version >> g >> steps >> seq.spec.crop_extent >> seq.spec.origin.x >>
        seq.spec.origin.y) ||
      magic != "gridplan-ogm" || version != 1 || g <= 0 || steps <= 0) {
    throw std::runtime_error("read_ogm_dump: malformed header");
  }
  seq.spec.grid_size = g;
  for (int t = 0; t < steps; ++t) {
    std::vector<double> v(static_cast<std::size_t>(g * g));
    for (double & x : v) {
      if (!(in >> x)) throw std::runtime_error("read_ogm_dump: truncated map " + std::to_string(t));
    }
    seq.maps.push_back(Tensor::from(std::move(v), {g, g}));
  }
  return seq;
}

}  // namespace gridplan
