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

#include "gridplan/trainer.hpp"

#include "gridplan/log.hpp"
#include "gridplan/ops.hpp"
#include "gridplan/optim.hpp"
#include "gridplan/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace gridplan
{

namespace fs = std::filesystem;
using ag::Tensor;

namespace
{

constexpr std::size_t kNoCache = static_cast<std::size_t>(-1);

nn::Rng derived_rng(std::initializer_list<std::uint64_t> parts)
{
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return nn::Rng(seq);
}

// Tags that keep the random streams of different purposes apart.
enum StreamTag : std::uint64_t {
  kSplitStream = 11,
  kShuffleStream = 12,
  kTrainStream = 13,
  kValidationStream = 14,
  kSampleCacheStream = 15,
  kEvalStream = 16,
  kInitStream = 17,
};

std::vector<std::size_t> capped_subset(std::size_t n, int cap, nn::Rng rng)
{
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (cap <= 0 || n <= static_cast<std::size_t>(cap)) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string num(double v)
{
  const std::string s = format_g9(v);
  return std::isfinite(v) ? s : "\"" + s + "\"";
}

Trajectory absolute(std::span<const double> flat, Vec2 origin)
{
  Trajectory t = unflatten(flat);
  for (Vec2 & p : t) p = p + origin;
  return t;
}

std::vector<Trajectory> rows_to_trajectories(const Tensor & reps, Vec2 origin)
{
  const int k = reps.dim(reps.rank() - 2);
  const int d = reps.dim(reps.rank() - 1);
  std::vector<Trajectory> out;
  const auto v = reps.data();
  for (int i = 0; i < k; ++i) out.push_back(absolute(v.subspan(static_cast<std::size_t>(i) * d, d), origin));
  return out;
}

struct MetricSums
{
  std::map<std::string, double> sum;
  std::map<std::string, long> count;

  void add(const std::string & key, double v)
  {
    sum[key] += v;
    ++count[key];
  }
  void add(const std::string & prefix, const DisplacementMetrics & m, int k)
  {
    const std::string s = "_" + std::to_string(k);
    add(prefix + "min_ade" + s, m.min_ade);
    add(prefix + "min_fde" + s, m.min_fde);
    add(prefix + "rf" + s, m.rf);
  }
  std::map<std::string, double> means() const
  {
    std::map<std::string, double> out;
    for (const auto & [k, v] : sum) out[k] = v / static_cast<double>(count.at(k));
    return out;
  }
};

}  // namespace

const std::vector<ScenarioObservation> & SplitData::get(const std::string & name) const
{
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
}

SplitData load_splits(const RunConfig & config)
{
  std::vector<DatasetRecord> records;
  std::map<int, SceneImage> scenes;
  if (config.data.path.empty()) {
    SyntheticCorpus syn = generate_synthetic(config.data.synthetic);
    records = std::move(syn.records);
    scenes = std::move(syn.scenes);
  } else {
    records = read_records(fs::path(config.data.path) / "trajectories.csv");
    scenes = load_scenes(config.data.path, records);
  }
  std::vector<int> ids;
  for (const DatasetRecord & r : records) ids.push_back(r.scene_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  SceneSplit split = split_scenes(ids, config.data.val_fraction, config.data.test_fraction);
  if (config.data.augment) {
    records = augment(records, scenes, split.train);
    const std::vector<int> base = split.train;
    for (int s : base) {
      for (int k = 1; k < 8; ++k) split.train.push_back(s * 8 + k);
    }
  }
  const Corpus corpus(std::move(records), std::move(scenes), config.dataset_config());

  auto build = [&](const std::vector<int> & scene_ids, int cap, std::uint64_t tag) {
    std::vector<WindowRef> refs;
    for (const WindowRef & w : corpus.windows()) {
      const int sid = corpus.tracks()[w.track].scene_id;
      if (std::find(scene_ids.begin(), scene_ids.end(), sid) != scene_ids.end()) refs.push_back(w);
    }
    std::vector<ScenarioObservation> out;
    for (std::size_t i : capped_subset(refs.size(), cap, derived_rng({config.seed, kSplitStream, tag}))) {
      out.push_back(corpus.observation(refs[i]));
    }
    return out;
  };
  SplitData d;
  d.train = build(split.train, config.train.max_train, 0);
  d.val = build(split.val, config.train.max_eval, 1);
  d.test = build(split.test, config.train.max_eval, 2);
  log::info(
    "data: " + std::to_string(d.train.size()) + " train / " + std::to_string(d.val.size()) + " val / " +
    std::to_string(d.test.size()) + " test scenarios from " + std::to_string(ids.size()) + " scenes");
  return d;
}

Tensor relative_future(const ScenarioObservation & obs)
{
  std::vector<double> v;
  const Vec2 o = obs.origin();
  for (const Vec2 & p : obs.future) {
    v.push_back(p.x - o.x);
    v.push_back(p.y - o.y);
  }
  const int n = static_cast<int>(v.size());
  return Tensor::from(std::move(v), {n});
}

Trainer::Trainer(RunConfig config, SplitData data, fs::path run_dir)
: config_(std::move(config)),
  data_(std::move(data)),
  run_dir_(std::move(run_dir)),
  model_(config_.model, derived_rng({config_.seed, kInitStream})())
{
  config_.validate();
  if (!run_dir_.empty()) {
    fs::create_directories(run_dir_ / "checkpoints");
    config_.save(run_dir_ / "config.json");
  }
}

std::vector<ParamGroup> Trainer::trainable(Stage stage) const
{
  switch (stage) {
    case Stage::kOGM: return {ParamGroup::kEncoder, ParamGroup::kOGM};
    case Stage::kDist: return {ParamGroup::kPolicy, ParamGroup::kDecoder};
    case Stage::kRefine: return {ParamGroup::kRefinement};
    case Stage::kFinetune:
      return {ParamGroup::kEncoder, ParamGroup::kOGM, ParamGroup::kPolicy, ParamGroup::kDecoder, ParamGroup::kRefinement};
  }
  return {};
}

Trainer::FrozenUpstream Trainer::frozen_upstream(std::size_t index, const ScenarioObservation & obs)
{
  if (cache_upstream_ && index != kNoCache && index < upstream_cache_.size() && upstream_cache_[index]) {
    return *upstream_cache_[index];
  }
  FrozenUpstream up;
  {
    ag::NoGradGuard guard;
    up.enc = model_.encode(obs);
    up.ogms = model_.ogms(up.enc);
  }
  if (cache_upstream_ && index != kNoCache && index < upstream_cache_.size()) upstream_cache_[index] = up;
  return up;
}

void Trainer::prepare_stage(Stage stage)
{
  for (ParamGroup g :
       {ParamGroup::kEncoder, ParamGroup::kOGM, ParamGroup::kPolicy, ParamGroup::kDecoder, ParamGroup::kRefinement}) {
    model_.set_trainable(g, false);
  }
  for (ParamGroup g : trainable(stage)) model_.set_trainable(g, true);

  upstream_cache_.assign(data_.train.size(), std::nullopt);
  sample_cache_.clear();
  cached_for_ = stage;
  const ModelConfig & m = config_.model;
  const double g2 = static_cast<double>(m.grid_size) * m.grid_size;
  const double per_scenario = 8.0 * g2 *
                              (m.scene_channels + 2.0 * (m.hidden + 2) + 1.0 + m.t_f * (1.0 + m.ogm_hidden));
  const double total_mb = per_scenario * static_cast<double>(data_.train.size()) / (1024.0 * 1024.0);
  cache_upstream_ = (stage == Stage::kDist || stage == Stage::kRefine) && total_mb <= config_.train.cache_limit_mb;
  if ((stage == Stage::kDist || stage == Stage::kRefine) && !cache_upstream_) {
    log::info("train: frozen encoder/OGM outputs (" + format_g9(total_mb) + " MiB) exceed the cache limit");
  }
  if (stage == Stage::kRefine) {
    // Upstream is frozen for the whole stage, so each scenario keeps one fixed set of C samples.
    ag::NoGradGuard guard;
    for (std::size_t i = 0; i < data_.train.size(); ++i) {
      const ScenarioObservation & obs = data_.train[i];
      nn::Rng rng = derived_rng({config_.seed, kSampleCacheStream, i});
      const FrozenUpstream up = frozen_upstream(i, obs);
      const PolicyOutput pol = model_.policy(up.enc);
      const DecoderContext ctx = model_.context(up.enc, pol, up.ogms);
      sample_cache_.push_back(model_.sample(ctx, pol, config_.train.num_samples, config_.train.tau, rng)
                                .relative(obs.origin()));
    }
  }
}

Tensor Trainer::sce_loss(
  const ScenarioObservation & obs, const Encoding & enc, const OGMSequence & ogms, double beta, nn::Rng & rng,
  StageLoss & parts)
{
  const PolicyOutput pol = model_.policy(enc);
  const DecoderContext ctx = model_.context(enc, pol, ogms);
  const GridMDP mdp = model_.mdp(enc.spec);
  const Plan gt = extract_gt_plan(obs.future, mdp);
  const Rollout tf = model_.teacher_forced(ctx, gt, obs.future);
  Tensor loss = forward_ce(gt, pol.policy.log_pi, mdp, tf.nll);
  parts.forward = loss.item();
  if (beta > 0.0) {
    const SampleSet s = model_.sample(ctx, pol, config_.train.reverse_samples, config_.train.tau, rng);
    std::vector<Tensor> maps;
    for (const Tensor & m : ogms.maps) maps.push_back(m.detach());
    const Tensor rev = reverse_ce(maps, s.rollout.positions, enc.spec);
    parts.reverse = rev.item();
    loss = ag::add(loss, ag::mul_scalar(rev, beta));
  }
  return loss;
}

Trainer::StageLoss Trainer::scenario_loss(
  Stage stage, std::size_t index, const ScenarioObservation & obs, nn::Rng & rng, bool training)
{
  StageLoss out;
  const int k = config_.model.k;
  const int d = 2 * config_.model.t_f;
  switch (stage) {
    case Stage::kOGM: {
      const Encoding enc = model_.encode(obs);
      out.loss = ogm_nll(model_.ogms(enc), obs.future);
      break;
    }
    case Stage::kDist: {
      const FrozenUpstream up = frozen_upstream(index, obs);
      out.loss = sce_loss(obs, up.enc, up.ogms, config_.train.beta, rng, out);
      break;
    }
    case Stage::kRefine: {
      const FrozenUpstream up = frozen_upstream(index, obs);
      Tensor samples;
      if (index != kNoCache && index < sample_cache_.size()) {
        samples = sample_cache_[index];
      } else {
        ag::NoGradGuard guard;
        const PolicyOutput pol = model_.policy(up.enc);
        samples = model_.sample(model_.context(up.enc, pol, up.ogms), pol, config_.train.num_samples,
                                config_.train.tau, rng)
                    .relative(obs.origin());
      }
      const Tensor reps = model_.refine(samples, up.enc, training, rng);
      out.loss = variety_loss(relative_future(obs), ag::reshape(reps, {k, d}));
      break;
    }
    case Stage::kFinetune: {
      const Encoding enc = model_.encode(obs);
      const OGMSequence ogms = model_.ogms(enc);
      const PolicyOutput pol = model_.policy(enc);
      const SampleSet s =
        model_.sample(model_.context(enc, pol, ogms), pol, config_.train.num_samples, config_.train.tau, rng);
      const Tensor reps = model_.refine(s.relative(obs.origin()), enc, training, rng);
      out.loss = variety_loss(relative_future(obs), ag::reshape(reps, {k, d}));
      if (config_.train.finetune_sce_weight > 0.0) {
        StageLoss parts;
        const Tensor sce = sce_loss(obs, enc, ogms, config_.train.beta, rng, parts);
        out.loss = ag::add(out.loss, ag::mul_scalar(sce, config_.train.finetune_sce_weight));
      }
      break;
    }
  }
  return out;
}

[[noreturn]] void Trainer::fail(
  Stage stage, int epoch, std::size_t batch, const std::vector<std::size_t> & members, const std::string & why)
{
  const fs::path dir = run_dir_.empty() ? fs::temp_directory_path() : run_dir_ / "diagnostics";
  fs::create_directories(dir);
  const fs::path path = dir / ("nonfinite_" + std::string(to_string(stage)) + "_epoch" + std::to_string(epoch) +
                               "_batch" + std::to_string(batch) + ".json");
  std::ofstream out(path);
  out << "{\"stage\":\"" << to_string(stage) << "\",\"epoch\":" << epoch << ",\"batch\":" << batch
      << ",\"reason\":\"" << why << "\",\"scenarios\":[";
  for (std::size_t i = 0; i < members.size(); ++i) {
    const ScenarioObservation & obs = data_.train[members[i]];
    out << (i ? "," : "") << "{\"id\":\"" << obs.id << "\",\"history\":[";
    for (std::size_t t = 0; t < obs.history.size(); ++t) {
      out << (t ? "," : "") << '[' << num(obs.history[t].x) << ',' << num(obs.history[t].y) << ']';
    }
    out << "],\"future\":[";
    for (std::size_t t = 0; t < obs.future.size(); ++t) {
      out << (t ? "," : "") << '[' << num(obs.future[t].x) << ',' << num(obs.future[t].y) << ']';
    }
    out << "],\"neighbors\":" << obs.neighbors.size() << '}';
  }
  out << "],\"parameters\":[";
  bool first = true;
  for (auto & [name, t] : model_.parameters()) {
    double lo = INFINITY, hi = -INFINITY, gmax = 0.0;
    long bad = 0;
    for (double v : t.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      bad += !std::isfinite(v);
    }
    for (double g : t.grad()) gmax = std::max(gmax, std::abs(g));
    out << (first ? "" : ",") << "{\"name\":\"" << name << "\",\"min\":" << num(lo) << ",\"max\":" << num(hi)
        << ",\"nonfinite\":" << bad << ",\"max_abs_grad\":" << num(gmax) << '}';
    first = false;
  }
  out << "]}\n";
  throw TrainingDiverged(
    std::string("stage ") + to_string(stage) + ", epoch " + std::to_string(epoch) + ", batch " +
      std::to_string(batch) + ": " + why + " (diagnostics in " + path.string() + ")",
    path);
}

void Trainer::record(const EpochRecord & rec)
{
  history_.push_back(rec);
  char line[256];
  std::snprintf(
    line, sizeof(line), "[%s] epoch %d  train %.6g  val %.6g  |g| %.3g  (%.1f s)", to_string(rec.stage), rec.epoch,
    rec.train_loss, rec.val_loss, rec.grad_norm, rec.seconds);
  log::info(line);
  if (!run_dir_.empty()) append_metrics(run_dir_ / "metrics.jsonl", epoch_json(rec));
  if (on_epoch) on_epoch(rec);
}

void Trainer::train(const std::vector<Stage> & stages)
{
  for (Stage s : stages) {
    train_stage(s);
    if (!run_dir_.empty()) {
      save(run_dir_ / "checkpoints" / (std::to_string(static_cast<int>(s) + 1) + "_" + to_string(s) + ".ckpt"), s);
    }
  }
}

void Trainer::train_stage(Stage stage, int epochs)
{
  if (epochs < 0) epochs = config_.epochs(stage);
  if (data_.train.empty()) throw std::runtime_error("train: no training scenarios");
  prepare_stage(stage);
  optim::AdamOptions opts;
  opts.lr = config_.lr(stage);
  opts.clip_norm = config_.train.clip_norm;
  std::vector<Tensor> params = model_.parameters(trainable(stage));
  optim::Adam adam(params, opts);
  const std::size_t n = data_.train.size();
  const std::size_t batch = static_cast<std::size_t>(config_.train.batch_size);
  log::info(
    std::string("[") + to_string(stage) + "] " + std::to_string(epochs) + " epoch(s), " + std::to_string(n) +
    " scenarios, lr " + format_g9(opts.lr));

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::Rng shuffle = derived_rng({config_.seed, kShuffleStream, static_cast<std::uint64_t>(stage),
                                   static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle);
    double total = 0.0, norm_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b * batch < n; ++b) {
      const std::vector<std::size_t> members(
        order.begin() + static_cast<std::ptrdiff_t>(b * batch),
        order.begin() + static_cast<std::ptrdiff_t>(std::min(n, (b + 1) * batch)));
      adam.zero_grad();
      for (std::size_t i : members) {
        nn::Rng rng = derived_rng({config_.seed, kTrainStream, static_cast<std::uint64_t>(stage),
                                   static_cast<std::uint64_t>(epoch), i});
        StageLoss l;
        try {
          l = scenario_loss(stage, i, data_.train[i], rng, true);
        } catch (const std::domain_error & e) {
          fail(stage, epoch, b, members, e.what());
        }
        const double v = l.loss.item();
        if (!std::isfinite(v)) fail(stage, epoch, b, members, "non-finite loss " + format_g9(v));
        l.loss.backward();
        total += v;
      }
      double sq = 0.0;
      for (const Tensor & p : params) {
        for (double g : p.grad()) sq += g * g;
      }
      if (!std::isfinite(sq)) fail(stage, epoch, b, members, "non-finite gradient");
      norm_sum += adam.step(static_cast<double>(members.size()));
      ++batches;
    }
    EpochRecord rec;
    rec.stage = stage;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(n);
    rec.grad_norm = norm_sum / static_cast<double>(batches);
    rec.val_loss = data_.val.empty() ? NAN : validation_loss(stage, "val");
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record(rec);
  }
}

double Trainer::validation_loss(Stage stage, const std::string & split)
{
  const auto & set = data_.get(split);
  if (set.empty()) return NAN;
  ag::NoGradGuard guard;
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    nn::Rng rng = derived_rng({config_.seed, kValidationStream, i});
    total += scenario_loss(stage, kNoCache, set[i], rng, false).loss.item();
  }
  return total / static_cast<double>(set.size());
}

PredictionRecord Trainer::predict(const ScenarioObservation & obs, int num_samples, std::uint64_t seed)
{
  ag::NoGradGuard guard;
  nn::Rng rng = derived_rng({seed, kEvalStream, 0});
  const Encoding enc = model_.encode(obs);
  const OGMSequence ogms = model_.ogms(enc);
  const PolicyOutput pol = model_.policy(enc);
  const SampleSet s = model_.sample(model_.context(enc, pol, ogms), pol, num_samples, config_.train.tau, rng);
  PredictionRecord rec;
  rec.example_id = obs.id;
  rec.samples = s.trajectories();
  rec.representatives = rows_to_trajectories(model_.refine(s.relative(obs.origin()), enc, false, rng), obs.origin());
  const auto m = min_ade_fde(obs.future, rec.representatives);
  rec.metrics["min_ade"] = m.min_ade;
  rec.metrics["min_fde"] = m.min_fde;
  rec.metrics["rf"] = m.rf;
  return rec;
}

EvalReport Trainer::evaluate(const EvalOptions & options)
{
  const auto & set = data_.get(options.split);
  if (set.empty()) throw std::runtime_error("evaluate: split '" + options.split + "' is empty");
  ag::NoGradGuard guard;
  const int k = config_.model.k;
  const int c = config_.train.num_samples;
  const int ds = config_.train.dist_samples;
  const int m = std::min(config_.train.reverse_samples, c);
  MetricSums sums;
  OffroadCounter dist_off, rep_off, rand_off, km_off;
  EvalReport report;

  for (std::size_t i = 0; i < set.size(); ++i) {
    const ScenarioObservation & obs = set[i];
    nn::Rng rng = derived_rng({options.seed, kEvalStream, i});
    const Vec2 origin = obs.origin();
    const Encoding enc = model_.encode(obs);
    const OGMSequence ogms = model_.ogms(enc);
    const PolicyOutput pol = model_.policy(enc);
    const DecoderContext ctx = model_.context(enc, pol, ogms);
    const SampleSet s = model_.sample(ctx, pol, c, config_.train.tau, rng);
    const std::vector<Trajectory> samples = s.trajectories();
    const Trajectory & gt = obs.future;
    const bool has_road = obs.raster.has_road_mask();
    const GridField road = has_road ? obs.raster.road_mask(origin) : GridField{};
    PredictionRecord rec;
    rec.example_id = obs.id;

    const std::vector<Trajectory> dist(samples.begin(), samples.begin() + ds);
    sums.add("dist_", min_ade_fde(gt, dist), ds);
    if (has_road) dist_off.add(dist, gt, road);

    if (options.losses) {
      sums.add("ogm_nll", ogm_nll(ogms, gt).item());
      const GridMDP mdp = model_.mdp(enc.spec);
      const Plan plan = extract_gt_plan(gt, mdp);
      const double fwd = forward_ce(plan, pol.policy.log_pi, mdp, model_.teacher_forced(ctx, plan, gt).nll).item();
      std::vector<Tensor> first_m;
      for (const Tensor & p : s.rollout.positions) first_m.push_back(ag::slice(p, 0, 0, m));
      const double rev = reverse_ce(ogms.maps, first_m, enc.spec).item();
      sums.add("forward_ce", fwd);
      sums.add("reverse_ce", rev);
      sums.add("sce", fwd + config_.train.beta * rev);
    }
    if (options.refine) {
      const Tensor reps_t = model_.refine(s.relative(origin), enc, false, rng);
      const std::vector<Trajectory> reps = rows_to_trajectories(reps_t, origin);
      const DisplacementMetrics dm = min_ade_fde(gt, reps);
      sums.add("", dm, k);
      sums.add("", min_ade_fde(gt, {reps.front()}), 1);
      sums.add("variety", variety_loss(gt, reps));
      if (has_road) rep_off.add(reps, gt, road);
      rec.representatives = reps;
      rec.metrics["min_ade_" + std::to_string(k)] = dm.min_ade;
      rec.metrics["min_fde_" + std::to_string(k)] = dm.min_fde;
      rec.metrics["rf_" + std::to_string(k)] = dm.rf;
    }
    if (options.baselines) {
      std::vector<std::size_t> idx(samples.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<Trajectory> subset;
      for (int j = 0; j < k; ++j) subset.push_back(samples[idx[j]]);
      sums.add("random_", min_ade_fde(gt, subset), k);
      sums.add("random_variety", variety_loss(gt, subset));
      if (has_road) rand_off.add(subset, gt, road);

      std::vector<std::vector<double>> flat;
      for (const Trajectory & t : samples) {
        Trajectory rel = t;
        for (Vec2 & p : rel) p = p - origin;
        flat.push_back(flatten(rel));
      }
      const KMeansResult km = kmeans(flat, k, rng);
      std::vector<Trajectory> centroids;
      for (const auto & cvec : km.centroids) centroids.push_back(absolute(cvec, origin));
      sums.add("kmeans_", min_ade_fde(gt, centroids), k);
      sums.add("kmeans_variety", variety_loss(gt, centroids));
      if (has_road) km_off.add(centroids, gt, road);
    }
    if (options.keep_predictions) {
      rec.samples = samples;
      report.predictions.push_back(std::move(rec));
    }
  }
  report.metrics = sums.means();
  report.metrics["scenarios"] = static_cast<double>(set.size());
  report.metrics["dist_offroad"] = dist_off.rate();
  report.metrics["offroad_excluded"] = static_cast<double>(dist_off.excluded());
  if (options.refine) report.metrics["offroad_rate"] = rep_off.rate();
  if (options.baselines) {
    report.metrics["random_offroad"] = rand_off.rate();
    report.metrics["kmeans_offroad"] = km_off.rate();
  }
  return report;
}

void Trainer::save(const fs::path & path, Stage stage)
{
  save_checkpoint(
    path, Checkpoint::capture(config_.model.fingerprint(), to_string(stage), config_.to_json(), model_.parameters()));
  log::info("checkpoint: " + path.string());
}

void Trainer::load(const fs::path & path, bool force)
{
  const Checkpoint ckpt = load_checkpoint(path);
  auto params = model_.parameters();
  ckpt.restore(params, config_.model.fingerprint(), force);
}

std::optional<fs::path> Trainer::resume()
{
  const fs::path dir = run_dir_ / "checkpoints";
  if (run_dir_.empty() || !fs::is_directory(dir)) return std::nullopt;
  std::vector<fs::path> found;
  for (const auto & e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".ckpt") found.push_back(e.path());
  }
  if (found.empty()) return std::nullopt;
  std::sort(found.begin(), found.end());
  load(found.back());
  log::info("resumed from " + found.back().string());
  return found.back();
}

void append_metrics(const fs::path & path, const std::string & json_line)
{
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << json_line << '\n';
}

std::string epoch_json(const EpochRecord & rec)
{
  std::ostringstream s;
  s << "{\"kind\":\"epoch\",\"stage\":\"" << to_string(rec.stage) << "\",\"epoch\":" << rec.epoch
    << ",\"train_loss\":" << num(rec.train_loss) << ",\"val_loss\":" << num(rec.val_loss)
    << ",\"grad_norm\":" << num(rec.grad_norm) << '}';
  return s.str();
}

std::string eval_json(const std::string & split, const EvalReport & report)
{
  std::ostringstream s;
  s << "{\"kind\":\"eval\",\"split\":\"" << split << "\",\"metrics\":{";
  bool first = true;
  for (const auto & [k, v] : report.metrics) {
    s << (first ? "" : ",") << '"' << k << "\":" << num(v);
    first = false;
  }
  s << "}}";
  return s.str();
}

}  // namespace gridplan
