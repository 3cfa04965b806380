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

#ifndef GRIDPLAN__TRAINER_HPP_
#define GRIDPLAN__TRAINER_HPP_

#include "gridplan/checkpoint.hpp"
#include "gridplan/config.hpp"
#include "gridplan/dataset.hpp"
#include "gridplan/model.hpp"
#include "gridplan/predictions.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridplan
{

/// Non-finite loss during training; the offending batch was dumped to `dump_path`.
class TrainingDiverged : public std::runtime_error
{
public:
  TrainingDiverged(const std::string & what, std::filesystem::path dump)
  : std::runtime_error(what), dump_path(std::move(dump))
  {
  }
  std::filesystem::path dump_path;
};

/// Scenario lists of the three splits.
struct SplitData
{
  std::vector<ScenarioObservation> train, val, test;
  const std::vector<ScenarioObservation> & get(const std::string & name) const;
};

/// Loads the configured corpus (directory or synthetic), splits it by scene and applies the caps.
SplitData load_splits(const RunConfig & config);

struct EpochRecord
{
  Stage stage = Stage::kOGM;
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
};

struct EvalOptions
{
  std::string split = "test";
  bool refine = true;      // score the refinement output (otherwise only the sample-based metrics)
  bool baselines = true;   // random-subset and k-means representatives
  bool losses = true;      // held-out OGM NLL and cross-entropies
  bool keep_predictions = false;
  /// Seed of the evaluation noise; identical seeds give identical samples for identical weights.
  std::uint64_t seed = 7;
};

struct EvalReport
{
  std::map<std::string, double> metrics;
  std::vector<PredictionRecord> predictions;
};

/**
 * @brief Four-stage training, evaluation and sampling for one run.
 *
 * Stage ogm fits the encoders and OGM decoder to the OGM NLL; stage dist
 * fits the policy network and trajectory decoder to the symmetric
 * cross-entropy with the encoders and OGM decoder frozen; stage refine fits
 * the refinement network to the variety loss with everything upstream
 * frozen; stage finetune trains all parameters on the variety loss.
 * All randomness derives from the run seed, so identical configurations
 * give identical metrics.
 */
class Trainer
{
public:
  /// `run_dir` may be empty for in-memory runs (no files written).
  Trainer(RunConfig config, SplitData data, std::filesystem::path run_dir = {});

  void train(const std::vector<Stage> & stages);
  /// Trains one stage for `epochs` epochs (the configured count when negative).
  void train_stage(Stage stage, int epochs = -1);

  /// Held-out loss of a stage (OGM NLL, L_sce or variety loss) on `split`, with fixed noise.
  double validation_loss(Stage stage, const std::string & split = "val");
  EvalReport evaluate(const EvalOptions & options);

  /// C samples and K representatives for one scenario.
  PredictionRecord predict(const ScenarioObservation & obs, int num_samples, std::uint64_t seed);

  void save(const std::filesystem::path & path, Stage stage);
  /// Restores weights; throws FingerprintMismatch unless the architecture matches or `force` is set.
  void load(const std::filesystem::path & path, bool force = false);
  /// Loads the newest checkpoint in run_dir/checkpoints if any; returns its path.
  std::optional<std::filesystem::path> resume();

  GridPlanModel & model() { return model_; }
  const RunConfig & config() const { return config_; }
  const SplitData & data() const { return data_; }
  const std::vector<EpochRecord> & history() const { return history_; }
  /// Called after every epoch (logging hooks, tests).
  std::function<void(const EpochRecord &)> on_epoch;

private:
  struct StageLoss
  {
    ag::Tensor loss;
    double forward = 0.0;
    double reverse = 0.0;
  };

  struct FrozenUpstream
  {
    Encoding enc;
    OGMSequence ogms;
  };

  StageLoss scenario_loss(Stage stage, std::size_t index, const ScenarioObservation & obs, nn::Rng & rng, bool training);
  ag::Tensor sce_loss(
    const ScenarioObservation & obs, const Encoding & enc, const OGMSequence & ogms, double beta, nn::Rng & rng,
    StageLoss & parts);
  FrozenUpstream frozen_upstream(std::size_t index, const ScenarioObservation & obs);
  void prepare_stage(Stage stage);
  [[noreturn]] void fail(Stage stage, int epoch, std::size_t batch, const std::vector<std::size_t> & members, const std::string & why);
  void record(const EpochRecord & rec);
  std::vector<ParamGroup> trainable(Stage stage) const;

  RunConfig config_;
  SplitData data_;
  std::filesystem::path run_dir_;
  GridPlanModel model_;
  std::vector<EpochRecord> history_;
  // Per-training-scenario caches of frozen computations.
  std::vector<std::optional<FrozenUpstream>> upstream_cache_;
  std::vector<ag::Tensor> sample_cache_;
  bool cache_upstream_ = false;
  Stage cached_for_ = Stage::kOGM;
};

/// Relative ground-truth future flattened to [2 * t_f].
ag::Tensor relative_future(const ScenarioObservation & obs);

/// Appends one JSON line to `path`.
void append_metrics(const std::filesystem::path & path, const std::string & json_line);

std::string epoch_json(const EpochRecord & rec);
std::string eval_json(const std::string & split, const EvalReport & report);

}  // namespace gridplan

#endif  // GRIDPLAN__TRAINER_HPP_
