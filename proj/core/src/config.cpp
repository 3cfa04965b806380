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

#include "gridplan/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gridplan
{

using json = nlohmann::ordered_json;

const char * to_string(Stage s)
{
  switch (s) {
    case Stage::kOGM: return "ogm";
    case Stage::kDist: return "dist";
    case Stage::kRefine: return "refine";
    case Stage::kFinetune: return "finetune";
  }
  return "?";
}

Stage parse_stage(const std::string & name)
{
  for (Stage s : kAllStages) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown stage '" + name + "' (expected ogm, dist, refine or finetune)");
}

std::vector<Stage> parse_stages(const std::string & spec)
{
  if (spec == "all") return {kAllStages.begin(), kAllStages.end()};
  std::vector<Stage> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const Stage s = parse_stage(part);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("empty stage list");
  std::sort(out.begin(), out.end());
  return out;
}

namespace
{

// One binding routine serves both directions so the JSON layout cannot drift.
class Writer
{
public:
  explicit Writer(json & j) : j_(j) {}
  template <class T>
  void operator()(const char * key, T & v)
  {
    j_[key] = v;
  }
  template <class T, class ToS, class Parse>
  void named(const char * key, T & v, ToS to_s, Parse)
  {
    j_[key] = to_s(v);
  }
  template <class T, class ToS, class Parse>
  void named_list(const char * key, std::vector<T> & v, ToS to_s, Parse)
  {
    json a = json::array();
    for (const T & x : v) a.push_back(to_s(x));
    j_[key] = a;
  }
  template <class F>
  void section(const char * key, F && body)
  {
    json sub = json::object();
    Writer w(sub);
    body(w);
    j_[key] = sub;
  }

private:
  json & j_;
};

class Reader
{
public:
  Reader(const json & j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j.is_object()) throw std::invalid_argument("config: '" + name() + "' must be an object");
  }
  ~Reader() = default;

  template <class T>
  void operator()(const char * key, T & v)
  {
    if (!take(key)) return;
    try {
      v = j_.at(key).get<T>();
    } catch (const json::exception &) {
      throw std::invalid_argument("config: '" + qualify(key) + "' has the wrong type");
    }
  }
  template <class T, class ToS, class Parse>
  void named(const char * key, T & v, ToS, Parse parse)
  {
    if (!take(key)) return;
    v = parse(string_at(j_.at(key), key));
  }
  template <class T, class ToS, class Parse>
  void named_list(const char * key, std::vector<T> & v, ToS, Parse parse)
  {
    if (!take(key)) return;
    const json & a = j_.at(key);
    if (!a.is_array()) throw std::invalid_argument("config: '" + qualify(key) + "' must be an array");
    v.clear();
    for (const json & x : a) v.push_back(parse(string_at(x, key)));
  }
  template <class F>
  void section(const char * key, F && body)
  {
    if (!take(key)) return;
    Reader r(j_.at(key), qualify(key));
    body(r);
    r.finish();
  }
  void finish() const
  {
    for (const auto & [k, v] : j_.items()) {
      if (!seen_.count(k)) throw std::invalid_argument("config: unknown key '" + qualify(k.c_str()) + "'");
    }
  }

private:
  bool take(const char * key)
  {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string string_at(const json & v, const char * key) const
  {
    if (!v.is_string()) throw std::invalid_argument("config: '" + qualify(key) + "' must be a string");
    return v.get<std::string>();
  }
  std::string name() const { return path_.empty() ? "<root>" : path_; }
  std::string qualify(const char * key) const { return path_.empty() ? key : path_ + "." + key; }

  const json & j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class IO>
void bind(IO & io, RunConfig & c)
{
  io("seed", c.seed);
  io.section("model", [&](IO & m) {
    ModelConfig & x = c.model;
    m("grid_size", x.grid_size);
    m("crop_extent", x.crop_extent);
    m("horizon", x.horizon);
    m("t_p", x.t_p);
    m("t_f", x.t_f);
    m("raster_size", x.raster_size);
    m("scene_width1", x.scene_width1);
    m("scene_width2", x.scene_width2);
    m("scene_channels", x.scene_channels);
    m("pooling_cells", x.pooling_cells);
    m("hidden", x.hidden);
    m("heads", x.heads);
    m("ogm_hidden", x.ogm_hidden);
    m("ogm_layers", x.ogm_layers);
    m("deconv_k", x.deconv_k);
    m.named(
      "ogm_variant", x.ogm_variant, [](OGMVariant v) { return to_string(v); }, parse_ogm_variant);
    m("reward_hidden", x.reward_hidden);
    m.named(
      "reward_variant", x.reward_variant, [](RewardVariant v) { return to_string(v); }, parse_reward_variant);
    m("refine_d_model", x.refine_d_model);
    m("refine_heads", x.refine_heads);
    m("refine_layers", x.refine_layers);
    m("refine_ffn", x.refine_ffn);
    m("k", x.k);
    m("dropout", x.dropout);
  });
  io.section("train", [&](IO & t) {
    TrainConfig & x = c.train;
    t("beta", x.beta);
    t("tau", x.tau);
    t("num_samples", x.num_samples);
    t("reverse_samples", x.reverse_samples);
    t("dist_samples", x.dist_samples);
    t("lr_stage123", x.lr_stage123);
    t("lr_stage4", x.lr_stage4);
    t("batch_size", x.batch_size);
    t.section("epochs", [&](IO & e) {
      for (Stage s : kAllStages) e(to_string(s), x.epochs[static_cast<int>(s)]);
    });
    t("clip_norm", x.clip_norm);
    t("finetune_sce_weight", x.finetune_sce_weight);
    t("cache_limit_mb", x.cache_limit_mb);
    t("max_train", x.max_train);
    t("max_eval", x.max_eval);
    t.named_list(
      "stages", x.stages, [](Stage s) { return std::string(to_string(s)); }, parse_stage);
  });
  io.section("data", [&](IO & d) {
    DataConfig & x = c.data;
    d("path", x.path);
    d("window_stride", x.window_stride);
    d("val_fraction", x.val_fraction);
    d("test_fraction", x.test_fraction);
    d("augment", x.augment);
    d("dt", x.dt);
    d.section("synthetic", [&](IO & s) {
      SyntheticConfig & y = x.synthetic;
      s("seed", y.seed);
      s("n_scenes", y.n_scenes);
      s("n_agents", y.n_agents);
      s("cells", y.cells);
      s("cell_size", y.cell_size);
      s("road_width", y.road_width);
      s("speed_min", y.speed_min);
      s("speed_max", y.speed_max);
      s("lateral", y.lateral);
      s("jitter", y.jitter);
      s("max_start_frame", y.max_start_frame);
      s.named_list("layouts", y.layouts, [](Layout l) { return to_string(l); }, parse_layout);
    });
  });
}

}  // namespace

void RunConfig::validate() const
{
  model.validate();
  auto positive = [](const char * name, double v) {
    if (!(v > 0)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  if (!(train.beta >= 0.0)) throw std::invalid_argument("train.beta must be non-negative");
  positive("train.tau", train.tau);
  positive("train.num_samples", train.num_samples);
  positive("train.reverse_samples", train.reverse_samples);
  positive("train.dist_samples", train.dist_samples);
  positive("train.lr_stage123", train.lr_stage123);
  positive("train.lr_stage4", train.lr_stage4);
  positive("train.batch_size", train.batch_size);
  positive("train.cache_limit_mb", train.cache_limit_mb);
  for (Stage s : kAllStages) {
    if (train.epochs[static_cast<int>(s)] < 0) {
      throw std::invalid_argument(std::string("train.epochs.") + to_string(s) + " must be non-negative");
    }
  }
  if (train.clip_norm < 0.0) throw std::invalid_argument("train.clip_norm must be non-negative");
  if (train.finetune_sce_weight < 0.0) throw std::invalid_argument("train.finetune_sce_weight must be non-negative");
  if (train.max_train < 0 || train.max_eval < 0) throw std::invalid_argument("train.max_train/max_eval must be >= 0");
  if (train.stages.empty()) throw std::invalid_argument("train.stages must not be empty");
  if (train.num_samples < model.k) throw std::invalid_argument("train.num_samples must be at least model.k");
  if (train.dist_samples > train.num_samples) {
    throw std::invalid_argument("train.dist_samples must not exceed train.num_samples");
  }
  positive("data.window_stride", data.window_stride);
  positive("data.dt", data.dt);
  if (data.val_fraction < 0.0 || data.test_fraction < 0.0 || data.val_fraction + data.test_fraction >= 1.0) {
    throw std::invalid_argument("data.val_fraction and data.test_fraction must be >= 0 with a sum below 1");
  }
  if (data.path.empty()) {
    const SyntheticConfig & s = data.synthetic;
    positive("data.synthetic.n_scenes", s.n_scenes);
    positive("data.synthetic.n_agents", s.n_agents);
    positive("data.synthetic.cells", s.cells);
    positive("data.synthetic.cell_size", s.cell_size);
    positive("data.synthetic.speed_min", s.speed_min);
    if (s.speed_max < s.speed_min) throw std::invalid_argument("data.synthetic.speed_max must be >= speed_min");
    if (s.road_width < 1 || s.road_width % 2 == 0) {
      throw std::invalid_argument("data.synthetic.road_width must be odd and positive");
    }
  }
}

DatasetConfig RunConfig::dataset_config() const
{
  DatasetConfig d;
  d.t_p = model.t_p;
  d.t_f = model.t_f;
  d.dt = data.dt;
  d.crop_extent = model.crop_extent;
  d.raster_size = model.raster_size;
  d.window_stride = data.window_stride;
  return d;
}

std::string RunConfig::to_json() const
{
  json j = json::object();
  Writer w(j);
  RunConfig copy = *this;
  bind(w, copy);
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string & text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error & e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  RunConfig c;
  Reader r(j, "");
  bind(r, c);
  r.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return from_json(text);
  } catch (const std::invalid_argument & e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void RunConfig::save(const std::filesystem::path & path) const
{
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json();
}

}  // namespace gridplan
