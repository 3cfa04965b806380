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

// gridplan: train, evaluate and inspect grid-plan trajectory predictors.

#include "gridplan/config.hpp"
#include "gridplan/figures.hpp"
#include "gridplan/log.hpp"
#include "gridplan/synthetic.hpp"
#include "gridplan/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace gridplan;

namespace
{

struct Common
{
  std::string config;
  std::string run_dir = "runs/default";
  std::string checkpoint;
  std::string split = "test";
  bool force = false;
  bool quiet = false;
  int limit = 0;
};

// Config from --config, else the snapshot stored in the checkpoint, else the run directory snapshot.
RunConfig resolve_config(const Common & c)
{
  if (!c.config.empty()) return RunConfig::load(c.config);
  if (!c.checkpoint.empty()) return RunConfig::from_json(load_checkpoint(c.checkpoint).config);
  const fs::path snap = fs::path(c.run_dir) / "config.json";
  if (fs::exists(snap)) return RunConfig::load(snap);
  throw std::invalid_argument("no configuration: pass --config, --checkpoint or an existing --run-dir");
}

std::string default_checkpoint(const Common & c)
{
  if (!c.checkpoint.empty()) return c.checkpoint;
  const fs::path dir = fs::path(c.run_dir) / "checkpoints";
  std::vector<fs::path> found;
  if (fs::is_directory(dir)) {
    for (const auto & e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".ckpt") found.push_back(e.path());
    }
  }
  if (found.empty()) throw std::invalid_argument("no checkpoint: pass --checkpoint or train first");
  std::sort(found.begin(), found.end());
  return found.back().string();
}

std::vector<ScenarioObservation> limited(const std::vector<ScenarioObservation> & v, int limit)
{
  if (limit <= 0 || static_cast<std::size_t>(limit) >= v.size()) return v;
  return {v.begin(), v.begin() + limit};
}

Trainer loaded_trainer(const Common & c)
{
  RunConfig config = resolve_config(c);
  SplitData data = load_splits(config);
  Trainer trainer(std::move(config), std::move(data));
  const std::string ckpt = default_checkpoint(c);
  trainer.load(ckpt, c.force);
  log::info("loaded " + ckpt);
  return trainer;
}

int cmd_config(const std::string & out)
{
  const std::string text = RunConfig{}.to_json();
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream(out) << text;
  }
  return 0;
}

int cmd_generate(const Common & c, const std::string & out)
{
  const RunConfig config = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
  const SyntheticCorpus corpus = generate_synthetic(config.data.synthetic);
  write_corpus(out, corpus);
  std::printf("wrote %zu records in %zu scenes to %s\n", corpus.records.size(), corpus.scenes.size(), out.c_str());
  return 0;
}

int cmd_train(const Common & c, const std::string & stage_spec, bool resume)
{
  RunConfig config = resolve_config(c);
  const std::vector<Stage> stages = stage_spec.empty() ? config.train.stages : parse_stages(stage_spec);
  SplitData data = load_splits(config);
  Trainer trainer(std::move(config), std::move(data), c.run_dir);
  if (resume || stages.front() != Stage::kOGM) trainer.resume();
  trainer.train(stages);
  const EvalReport report = trainer.evaluate({.split = "val"});
  append_metrics(fs::path(c.run_dir) / "metrics.jsonl", eval_json("val", report));
  for (const auto & [k, v] : report.metrics) std::printf("val %-24s %s\n", k.c_str(), format_g9(v).c_str());
  return 0;
}

int cmd_eval(const Common & c, const std::string & predictions)
{
  Trainer trainer = loaded_trainer(c);
  EvalOptions opts;
  opts.split = c.split;
  opts.keep_predictions = !predictions.empty();
  const EvalReport report = trainer.evaluate(opts);
  for (const auto & [k, v] : report.metrics) std::printf("%s %-24s %s\n", c.split.c_str(), k.c_str(), format_g9(v).c_str());
  if (!predictions.empty()) {
    std::ofstream out(predictions);
    for (const auto & rec : report.predictions) write_prediction(out, rec);
  }
  const fs::path run = c.checkpoint.empty() ? fs::path(c.run_dir) : fs::path(c.checkpoint).parent_path().parent_path();
  if (fs::is_directory(run)) append_metrics(run / "metrics.jsonl", eval_json(c.split, report));
  return 0;
}

int cmd_sample(const Common & c, int n, const std::string & out, std::uint64_t seed)
{
  Trainer trainer = loaded_trainer(c);
  std::ofstream file;
  if (out != "-") file.open(out);
  std::ostream & os = out == "-" ? std::cout : file;
  for (const ScenarioObservation & obs : limited(trainer.data().get(c.split), c.limit)) {
    write_prediction(os, trainer.predict(obs, std::max(n, trainer.config().model.k), seed));
  }
  return 0;
}

int cmd_plot(const Common & c, const std::string & what, int step, int count, int scenario, const std::string & out)
{
  FigureOptions opts;
  opts.kind = parse_figure_kind(what);
  Trainer trainer = loaded_trainer(c);
  opts.step = step;
  opts.count = count;
  opts.tau = trainer.config().train.tau;
  opts.seed = trainer.config().seed;
  const auto & set = trainer.data().get(c.split);
  if (set.empty()) throw std::invalid_argument("split '" + c.split + "' is empty");
  const fs::path dir = out.empty() ? fs::path(c.run_dir) / "figures" : fs::path(out);
  const int first = scenario < 0 ? 0 : scenario;
  const int last = scenario < 0 ? std::min<int>(static_cast<int>(set.size()), std::max(1, c.limit)) : scenario + 1;
  if (first >= static_cast<int>(set.size())) throw std::out_of_range("scenario index out of range");
  for (int i = first; i < last; ++i) {
    for (const fs::path & p : render_figures(trainer.model(), set[i], opts, dir)) std::printf("%s\n", p.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"gridplan: grid-plan trajectory prediction"};
  app.require_subcommand(1);
  Common c;
  app.add_flag("-q,--quiet", c.quiet, "Only log warnings and errors");

  auto add_run = [&](CLI::App * sub) {
    sub->add_option("--config", c.config, "Run configuration (JSON)");
    sub->add_option("--run-dir", c.run_dir, "Run directory")->capture_default_str();
  };
  auto add_ckpt = [&](CLI::App * sub) {
    add_run(sub);
    sub->add_option("--checkpoint", c.checkpoint, "Checkpoint file (default: newest in <run-dir>/checkpoints)");
    sub->add_option("--split", c.split, "train, val or test")->capture_default_str();
    sub->add_flag("--force", c.force, "Load a checkpoint even if its architecture fingerprint differs");
  };

  std::string config_out;
  auto * config_cmd = app.add_subcommand("config", "Print the default configuration");
  config_cmd->add_option("--out", config_out, "Output file (default: stdout)");

  std::string corpus_out;
  auto * generate = app.add_subcommand("generate", "Write the synthetic corpus of a configuration to disk");
  generate->add_option("--config", c.config, "Run configuration (JSON)");
  generate->add_option("--out", corpus_out, "Output directory")->required();

  std::string stage_spec;
  bool resume = false;
  auto * train = app.add_subcommand("train", "Train one or more stages");
  add_run(train);
  train->add_option("--stage", stage_spec, "all, or a comma-separated subset of ogm,dist,refine,finetune");
  train->add_flag("--resume", resume, "Start from the newest checkpoint in the run directory");

  std::string predictions;
  auto * eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  add_ckpt(eval);
  eval->add_option("--predictions", predictions, "Write per-scenario predictions (JSON lines)");

  int n = 20;
  std::string sample_out = "-";
  std::uint64_t sample_seed = 1;
  auto * sample = app.add_subcommand("sample", "Sample trajectories and representatives per scenario");
  add_ckpt(sample);
  sample->add_option("--n", n, "Samples per scenario")->capture_default_str();
  sample->add_option("--limit", c.limit, "Maximum number of scenarios (0: all)");
  sample->add_option("--seed", sample_seed, "Sampling seed")->capture_default_str();
  sample->add_option("--out", sample_out, "Output file (default: stdout)");

  std::string what, plot_out;
  int step = 10, count = 10, scenario = -1;
  auto * plot = app.add_subcommand("plot", "Render figures (PPM) for scenarios of a split");
  add_ckpt(plot);
  plot->add_option("--what", what, "ogm, reward, policy, plan, dist or reps")->required();
  plot->add_option("--step", step, "MDP step n for reward and policy maps")->capture_default_str();
  plot->add_option("--count", count, "Plans or samples drawn")->capture_default_str();
  plot->add_option("--scenario", scenario, "Scenario index within the split (default: first --limit)");
  plot->add_option("--limit", c.limit, "Number of scenarios when --scenario is not given");
  plot->add_option("--out", plot_out, "Output directory (default: <run-dir>/figures)");

  CLI11_PARSE(app, argc, argv);
  if (c.quiet) log::set_level(log::Level::kWarn);

  try {
    if (*config_cmd) return cmd_config(config_out);
    if (*generate) return cmd_generate(c, corpus_out);
    if (*train) return cmd_train(c, stage_spec, resume);
    if (*eval) return cmd_eval(c, predictions);
    if (*sample) return cmd_sample(c, n, sample_out, sample_seed);
    if (*plot) return cmd_plot(c, what, step, count, scenario, plot_out);
  } catch (const TrainingDiverged & e) {
    log::error(e.what());
    return 3;
  } catch (const FingerprintMismatch & e) {
    log::error(e.what());
    return 4;
  } catch (const std::exception & e) {
    log::error(e.what());
    return 1;
  }
  return 0;
}
