#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "clapper/compressors.hpp"
#include "clapper/synth.hpp"
#include "clapper/tape.hpp"

namespace clapper::train {

enum class OptimizerKind { kAdam, kSgd };

std::string to_string(OptimizerKind kind);

struct StagePlan {
  int stage = 1;
  synth::TaskKind objective = synth::TaskKind::kCaptionRegression;
  // Parameter groups (see compress::param_group) held fixed during the stage.
  std::vector<std::string> frozen_groups;
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;  // batch order
};

// Warm-up: compressor and caption head on caption regression.
StagePlan warmup_plan(std::uint64_t seed);
// Fine-tune: everything on a classification task.
StagePlan finetune_plan(synth::TaskKind task, std::uint64_t seed);

struct StageRecord {
  int stage = 0;
  synth::TaskKind objective = synth::TaskKind::kCaptionRegression;
  std::vector<std::string> frozen_groups;
  std::vector<std::string> trainable_groups;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::vector<double> step_losses;   // mean batch loss before each update
  std::vector<double> epoch_losses;  // mean of the epoch's step losses
};

struct RunRecord {
  std::uint64_t seed = 0;
  compress::Strategy strategy = compress::Strategy::kTimePerceiver;
  std::vector<StageRecord> stages;
  std::map<std::string, double> accuracies;  // task name -> held-out accuracy
};

nlohmann::json to_json(const StageRecord& record);
nlohmann::json to_json(const RunRecord& record);

// Every task reads the packed tokens through one shared linear readout
// (head.shared) of this width, followed by its own linear output layer.
inline constexpr char kSharedHead[] = "shared";
inline constexpr std::size_t kSharedWidth = 32;

// Head name and output width for a task.
std::string head_name(synth::TaskKind task);
std::size_t head_outputs(synth::TaskKind task, std::size_t grid);

// Flattened token width a strategy produces for one task clip.
std::size_t feature_count(const compress::ModelParams& params);

// Adds the shared readout and the task head when missing.
void ensure_head(compress::ModelParams& params, synth::TaskKind task, std::uint64_t seed);

// Packed tokens of `clip` flattened to [1 x N*D], then the shared readout and
// the task head.
Var head_output(Tape& tape, const compress::BoundParams& bound,
                const compress::ModelParams& params, Var clip, synth::TaskKind task);

// Cross-entropy for classification, mean squared error for regression.
Var sample_loss(Tape& tape, const compress::BoundParams& bound,
                const compress::ModelParams& params, const synth::SyntheticSample& sample);

struct StageResult {
  compress::ModelParams params;
  StageRecord record;
};

// Runs one stage. Throws ConfigError when the data task differs from the
// plan objective or a needed head is missing.
StageResult train_stage(const StagePlan& plan, std::span<const synth::SyntheticSample> data,
                        compress::ModelParams params);

double evaluate_loss(const compress::ModelParams& params,
                     std::span<const synth::SyntheticSample> data);
// Fraction of correctly classified samples.
double evaluate_accuracy(const compress::ModelParams& params,
                         std::span<const synth::SyntheticSample> data);

}  // namespace clapper::train
