#include "clapper/training.hpp"

#include <algorithm>
#include <set>

#include "clapper/errors.hpp"
#include "clapper/ops.hpp"
#include "clapper/optim.hpp"
#include "clapper/pipeline.hpp"
#include "clapper/random.hpp"

namespace clapper::train {

using synth::SyntheticSample;
using synth::TaskKind;

namespace {

std::vector<std::string> all_groups(const compress::ModelParams& params) {
  std::set<std::string> groups;
  for (const auto& [name, value] : params.arrays) {
    groups.insert(compress::param_group(name));
  }
  return {groups.begin(), groups.end()};
}

bool is_frozen(const StagePlan& plan, const std::string& name) {
  const std::string group = compress::param_group(name);
  return std::find(plan.frozen_groups.begin(), plan.frozen_groups.end(), group) !=
         plan.frozen_groups.end();
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.index(i)]);
  }
  return order;
}

double sample_loss_value(const compress::ModelParams& params, const SyntheticSample& sample) {
  Tape tape;
  tape.set_grad_enabled(false);
  const compress::BoundParams bound = compress::bind(tape, params);
  return tape.value(sample_loss(tape, bound, params, sample)).item();
}

}  // namespace

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "sgd"; }

StagePlan warmup_plan(std::uint64_t seed) {
  StagePlan plan;
  plan.stage = 1;
  plan.objective = TaskKind::kCaptionRegression;
  plan.seed = seed;
  return plan;
}

StagePlan finetune_plan(TaskKind task, std::uint64_t seed) {
  StagePlan plan;
  plan.stage = 2;
  plan.objective = task;
  plan.seed = seed;
  return plan;
}

nlohmann::json to_json(const StageRecord& r) {
  return {{"stage", r.stage},
          {"objective", synth::to_string(r.objective)},
          {"frozen_groups", r.frozen_groups},
          {"trainable_groups", r.trainable_groups},
          {"epochs", r.epochs},
          {"batch_size", r.batch_size},
          {"learning_rate", r.learning_rate},
          {"optimizer", to_string(r.optimizer)},
          {"step_losses", r.step_losses},
          {"epoch_losses", r.epoch_losses}};
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const StageRecord& s : r.stages) {
    stages.push_back(to_json(s));
  }
  return {{"version", 1},
          {"seed", r.seed},
          {"strategy", compress::to_string(r.strategy)},
          {"stages", std::move(stages)},
          {"accuracies", r.accuracies}};
}

std::string head_name(TaskKind task) {
  switch (task) {
    case TaskKind::kChangeDirection:
      return "direction";
    case TaskKind::kChangedCell:
      return "cell";
    case TaskKind::kCaptionRegression:
      return "caption";
  }
  throw ConfigError("unknown task kind");
}

std::size_t head_outputs(TaskKind task, std::size_t grid) {
  switch (task) {
    case TaskKind::kChangeDirection:
      return 2;
    case TaskKind::kChangedCell:
      return grid * grid;
    case TaskKind::kCaptionRegression:
      return synth::kCaptionTargets;
  }
  throw ConfigError("unknown task kind");
}

std::size_t feature_count(const compress::ModelParams& params) {
  const std::size_t queries = compress::query_count(params.spec, params.dims.grid);
  return video::strategy_token_count(params.spec.strategy, synth::kTaskFrames, params.dims.grid,
                                     queries) *
         params.dims.channels;
}

void ensure_head(compress::ModelParams& params, TaskKind task, std::uint64_t seed) {
  if (!params.contains(compress::head_weight(kSharedHead))) {
    compress::add_head(params, kSharedHead, feature_count(params), kSharedWidth, seed);
  }
  const std::string name = head_name(task);
  if (!params.contains(compress::head_weight(name))) {
    compress::add_head(params, name, kSharedWidth, head_outputs(task, params.dims.grid), seed);
  }
}

Var head_output(Tape& tape, const compress::BoundParams& bound,
                const compress::ModelParams& params, Var clip, TaskKind task) {
  const std::string name = head_name(task);
  if (!bound.contains(compress::head_weight(name)) ||
      !bound.contains(compress::head_weight(kSharedHead))) {
    throw ConfigError("model has no head for task " + synth::to_string(task));
  }
  const Var tokens = video::pack_tokens(tape, clip, bound, params.spec);
  const Shape s = tape.shape(tokens);
  const Var flat = ad::reshape(tape, tokens, {1, s[0] * s[1]});
  const Var shared = ad::add_bias(
      tape, ad::matmul(tape, flat, bound.at(compress::head_weight(kSharedHead))),
      bound.at(compress::head_bias(kSharedHead)));
  const Var out = ad::matmul(tape, shared, bound.at(compress::head_weight(name)));
  return ad::add_bias(tape, out, bound.at(compress::head_bias(name)));
}

Var sample_loss(Tape& tape, const compress::BoundParams& bound,
                const compress::ModelParams& params, const SyntheticSample& sample) {
  const Var clip = tape.constant(sample.clip.values);
  const Var out = head_output(tape, bound, params, clip, sample.kind);
  if (sample.kind == TaskKind::kCaptionRegression) {
    return ad::mse(tape, out, sample.target);
  }
  return ad::cross_entropy(tape, out, sample.label);
}

StageResult train_stage(const StagePlan& plan, std::span<const SyntheticSample> data,
                        compress::ModelParams params) {
  for (const SyntheticSample& s : data) {
    if (s.kind != plan.objective) {
      throw ConfigError("stage " + std::to_string(plan.stage) + " objective is " +
                        synth::to_string(plan.objective) + " but data holds " +
                        synth::to_string(s.kind));
    }
  }
  if (plan.batch_size == 0) {
    throw ConfigError("batch size must be positive");
  }
  if (plan.learning_rate < 0.0) {
    throw ConfigError("learning rate must not be negative");
  }
  if (!params.contains(compress::head_weight(head_name(plan.objective)))) {
    throw ConfigError("model has no head for task " + synth::to_string(plan.objective));
  }

  StageRecord record;
  record.stage = plan.stage;
  record.objective = plan.objective;
  record.frozen_groups = plan.frozen_groups;
  for (const std::string& g : all_groups(params)) {
    if (std::find(plan.frozen_groups.begin(), plan.frozen_groups.end(), g) ==
        plan.frozen_groups.end()) {
      record.trainable_groups.push_back(g);
    }
  }
  record.epochs = plan.epochs;
  record.batch_size = plan.batch_size;
  record.learning_rate = plan.learning_rate;
  record.optimizer = plan.optimizer;

  OptimState state;
  state.learning_rate = plan.learning_rate;
  const auto trainable = [&plan](const std::string& name) { return !is_frozen(plan, name); };
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    Rng rng(derive_seed(plan.seed, 40 + static_cast<std::uint64_t>(plan.stage), epoch));
    const std::vector<std::size_t> order = shuffled(data.size(), rng);
    double epoch_total = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += plan.batch_size) {
      const std::size_t end = std::min(order.size(), begin + plan.batch_size);
      Tape tape;
      const compress::BoundParams bound = compress::bind(tape, params, trainable);
      // summing in index order keeps a batch's loss independent of the shuffle
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(batch.begin(), batch.end());
      Var total;
      for (std::size_t index : batch) {
        const Var loss = sample_loss(tape, bound, params, data[index]);
        total = total.valid() ? ad::add(tape, total, loss) : loss;
      }
      const Var batch_loss = ad::scale(tape, total, 1.0 / static_cast<double>(end - begin));
      const Gradients grads = tape.backward(batch_loss);
      ParamMap grad_map;
      for (const auto& [name, var] : bound.vars()) {
        if (tape.requires_grad(var)) {
          grad_map.emplace(name, grads.of(var));
        }
      }
      params.arrays = plan.optimizer == OptimizerKind::kAdam
                          ? adam_step(params.arrays, grad_map, state)
                          : sgd_step(params.arrays, grad_map, plan.learning_rate);
      const double value = tape.value(batch_loss).item();
      record.step_losses.push_back(value);
      epoch_total += value;
      ++steps;
    }
    record.epoch_losses.push_back(steps == 0 ? 0.0 : epoch_total / static_cast<double>(steps));
  }
  params.stage = plan.stage;
  return {std::move(params), std::move(record)};
}

double evaluate_loss(const compress::ModelParams& params, std::span<const SyntheticSample> data) {
  if (data.empty()) {
    throw InputError("cannot evaluate on an empty data set");
  }
  double total = 0.0;
  for (const SyntheticSample& s : data) {
    total += sample_loss_value(params, s);
  }
  return total / static_cast<double>(data.size());
}

double evaluate_accuracy(const compress::ModelParams& params,
                         std::span<const SyntheticSample> data) {
  if (data.empty()) {
    throw InputError("cannot evaluate on an empty data set");
  }
  std::size_t correct = 0;
  for (const SyntheticSample& s : data) {
    if (s.kind == TaskKind::kCaptionRegression) {
      throw ConfigError("accuracy is undefined for caption regression");
    }
    Tape tape;
    tape.set_grad_enabled(false);
    const compress::BoundParams bound = compress::bind(tape, params);
    const Array& logits =
        tape.value(head_output(tape, bound, params, tape.constant(s.clip.values), s.kind));
    const auto v = logits.values();
    const auto best = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    correct += best == s.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace clapper::train
