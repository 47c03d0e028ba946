#include "clapper/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <thread>

#include "clapper/errors.hpp"
#include "clapper/pipeline.hpp"
#include "clapper/random.hpp"

namespace clapper::ablation {
namespace {

using compress::Strategy;
using synth::TaskKind;

constexpr std::uint64_t kTrainStream = 70;
constexpr std::uint64_t kTestStream = 71;
constexpr std::size_t kFullGrid = 28;

// Runs f(0..n-1) on up to `threads` threads; rethrows the lowest-index error.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      f(i);
    }
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            f(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

std::string fmt(double v) { return bench::format_number(v); }

nlohmann::json spread_json(const Spread& s) {
  return {{"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"per_seed", s.per_seed}};
}

std::vector<train::RunRecord> flatten(const std::vector<std::vector<train::RunRecord>>& runs) {
  std::vector<train::RunRecord> out;
  for (const auto& arm : runs) {
    out.insert(out.end(), arm.begin(), arm.end());
  }
  return out;
}

Spread accuracy_spread(const std::vector<train::RunRecord>& runs, const std::string& task) {
  std::vector<double> values;
  for (const train::RunRecord& r : runs) {
    values.push_back(r.accuracies.at(task));
  }
  return spread_of(values);
}

}  // namespace

Spread spread_of(const std::vector<double>& values) {
  Spread s;
  s.per_seed = values;
  if (values.empty()) {
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

TrainedRun train_run(const config::Config& config, const Arm& arm, std::uint64_t seed,
                     const std::vector<TaskKind>& tasks) {
  const compress::ModelDims dims = config.dims();
  TrainedRun run;
  run.record.seed = seed;
  run.record.strategy = arm.strategy;
  compress::ModelParams params = compress::init_params(config.spec(arm.strategy), dims, seed);
  if (arm.warmup) {
    const auto captions =
        synth::make_corpus(TaskKind::kCaptionRegression, config.stage1_samples, dims.grid,
                           dims.channels, derive_seed(seed, kTrainStream, 0));
    train::StagePlan plan = train::warmup_plan(seed);
    plan.epochs = config.stage1_epochs;
    plan.batch_size = config.stage1_batch;
    plan.learning_rate = config.learning_rate;
    train::ensure_head(params, TaskKind::kCaptionRegression, seed);
    train::StageResult r = train::train_stage(plan, captions, std::move(params));
    params = std::move(r.params);
    run.record.stages.push_back(std::move(r.record));
  }
  for (const TaskKind task : tasks) {
    const auto index = 1 + static_cast<std::uint64_t>(task);
    const auto train_set = synth::make_corpus(task, config.stage2_samples, dims.grid,
                                              dims.channels, derive_seed(seed, kTrainStream, index));
    compress::ModelParams p = params;
    train::ensure_head(p, task, seed);
    train::StagePlan plan = train::finetune_plan(task, seed);
    plan.epochs = config.stage2_epochs;
    plan.batch_size = config.stage2_batch;
    plan.learning_rate = config.learning_rate;
    train::StageResult r = train::train_stage(plan, train_set, std::move(p));
    const auto test_set = synth::make_corpus(task, config.test_samples, dims.grid, dims.channels,
                                             derive_seed(seed, kTestStream, index));
    const std::string name = synth::to_string(task);
    run.record.accuracies[name] = train::evaluate_accuracy(r.params, test_set);
    run.record.stages.push_back(std::move(r.record));
    run.params[name] = std::move(r.params);
  }
  return run;
}

std::vector<std::vector<train::RunRecord>> run_arms(const config::Config& config,
                                                    const std::vector<Arm>& arms,
                                                    const std::vector<TaskKind>& tasks) {
  const std::size_t seeds = config.seeds.size();
  std::vector<std::vector<train::RunRecord>> records(arms.size(),
                                                     std::vector<train::RunRecord>(seeds));
  parallel_for(arms.size() * seeds, config.threads, [&](std::size_t job) {
    const std::size_t a = job / seeds, s = job % seeds;
    records[a][s] = train_run(config, arms[a], config.seeds[s], tasks).record;
  });
  return records;
}

std::vector<StrategyRow> ratio_rows(const config::Config& config) {
  std::vector<StrategyRow> rows;
  const std::size_t original = config.frames * config.grid * config.grid;
  for (const Strategy s : config.strategies) {
    StrategyRow row;
    row.strategy = s;
    row.tokens_per_video = video::strategy_token_count(s, config.frames, config.grid);
    row.full_grid_tokens_per_video = video::strategy_token_count(s, config.frames, kFullGrid);
    row.ratio = bench::compression_ratio(static_cast<std::int64_t>(original),
                                         static_cast<std::int64_t>(row.tokens_per_video));
    rows.push_back(std::move(row));
  }
  return rows;
}

AblationReport run_ablation_suite(const config::Config& config) {
  AblationReport report;
  report.config = config;
  report.rows = ratio_rows(config);
  std::vector<Arm> arms;
  for (const Strategy s : config.strategies) {
    arms.push_back({compress::to_string(s), s, config.warmup});
  }
  const auto runs = run_arms(config, arms, config.tasks);

  const auto baseline = std::find(config.strategies.begin(), config.strategies.end(),
                                  Strategy::kBaseline4x);
  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (const TaskKind task : config.tasks) {
      const std::string name = synth::to_string(task);
      report.rows[a].accuracy[name] = accuracy_spread(runs[a], name);
    }
  }
  if (baseline != config.strategies.end()) {
    const StrategyRow& base = report.rows[baseline - config.strategies.begin()];
    for (StrategyRow& row : report.rows) {
      for (const auto& [name, spread] : row.accuracy) {
        row.delta[name] = spread.mean - base.accuracy.at(name).mean;
      }
    }
  }
  report.runs = flatten(runs);
  return report;
}

std::vector<Arm> staging_arms() {
  return {{"temporal-pool-direct", Strategy::kTemporalPool, false},
          {"timeperceiver-direct", Strategy::kTimePerceiver, false},
          {"timeperceiver-two-stage", Strategy::kTimePerceiver, true}};
}

StagingReport run_staging_ablation(const config::Config& config, TaskKind task) {
  if (config.seeds.size() < 3) {
    throw ConfigError("staging ablation needs at least 3 seeds, got " +
                      std::to_string(config.seeds.size()));
  }
  StagingReport report;
  report.config = config;
  report.task = task;
  const std::vector<Arm> arms = staging_arms();
  const auto runs = run_arms(config, arms, {task});
  const std::string name = synth::to_string(task);
  for (std::size_t a = 0; a < arms.size(); ++a) {
    report.rows.push_back({arms[a], accuracy_spread(runs[a], name), 0.0});
  }
  const double direct = report.rows[1].accuracy.mean;
  for (StagingRow& row : report.rows) {
    row.delta_vs_direct = row.accuracy.mean - direct;
  }
  report.runs = flatten(runs);
  return report;
}

std::vector<std::vector<std::string>> csv_rows(const AblationReport& report) {
  std::vector<std::string> header = {"strategy", "compression_ratio", "compression_display",
                                     "tokens_per_video", "full_grid_tokens_per_video"};
  for (const TaskKind task : report.config.tasks) {
    const std::string t = synth::to_string(task);
    for (const char* col : {"_mean", "_min", "_max", "_delta_vs_baseline4x"}) {
      header.push_back(t + col);
    }
  }
  std::vector<std::vector<std::string>> out = {header};
  for (const StrategyRow& row : report.rows) {
    std::vector<std::string> line = {compress::to_string(row.strategy), fmt(row.ratio.value),
                                     row.ratio.display, std::to_string(row.tokens_per_video),
                                     std::to_string(row.full_grid_tokens_per_video)};
    for (const TaskKind task : report.config.tasks) {
      const std::string t = synth::to_string(task);
      const Spread& s = row.accuracy.at(t);
      line.push_back(fmt(s.mean));
      line.push_back(fmt(s.min));
      line.push_back(fmt(s.max));
      line.push_back(row.delta.contains(t) ? fmt(row.delta.at(t)) : "");
    }
    out.push_back(std::move(line));
  }
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const StagingReport& report) {
  std::vector<std::vector<std::string>> out = {{"setup", "strategy", "stages", "task", "mean",
                                                "min", "max", "delta_vs_direct"}};
  for (const StagingRow& row : report.rows) {
    out.push_back({row.arm.name, compress::to_string(row.arm.strategy),
                   row.arm.warmup ? "1+2" : "2", synth::to_string(report.task),
                   fmt(row.accuracy.mean), fmt(row.accuracy.min), fmt(row.accuracy.max),
                   fmt(row.delta_vs_direct)});
  }
  return out;
}

nlohmann::json to_json(const AblationReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const StrategyRow& row : report.rows) {
    nlohmann::json acc = nlohmann::json::object();
    for (const auto& [task, spread] : row.accuracy) {
      acc[task] = spread_json(spread);
    }
    rows.push_back({{"strategy", compress::to_string(row.strategy)},
                    {"compression_ratio", row.ratio.value},
                    {"compression_display", row.ratio.display},
                    {"tokens_per_video", row.tokens_per_video},
                    {"full_grid_tokens_per_video", row.full_grid_tokens_per_video},
                    {"accuracy", std::move(acc)},
                    {"delta_vs_baseline4x", row.delta}});
  }
  nlohmann::json runs = nlohmann::json::array();
  for (const train::RunRecord& r : report.runs) {
    runs.push_back(train::to_json(r));
  }
  return {{"version", 1},
          {"report", "ablation"},
          {"config", config::to_text(report.config)},
          {"rows", std::move(rows)},
          {"runs", std::move(runs)}};
}

nlohmann::json to_json(const StagingReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const StagingRow& row : report.rows) {
    rows.push_back({{"setup", row.arm.name},
                    {"strategy", compress::to_string(row.arm.strategy)},
                    {"warmup", row.arm.warmup},
                    {"accuracy", spread_json(row.accuracy)},
                    {"delta_vs_direct", row.delta_vs_direct}});
  }
  nlohmann::json runs = nlohmann::json::array();
  for (const train::RunRecord& r : report.runs) {
    runs.push_back(train::to_json(r));
  }
  return {{"version", 1},
          {"report", "staging"},
          {"task", synth::to_string(report.task)},
          {"config", config::to_text(report.config)},
          {"rows", std::move(rows)},
          {"runs", std::move(runs)}};
}

}  // namespace clapper::ablation
