#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "clapper/bench.hpp"
#include "clapper/config.hpp"
#include "clapper/training.hpp"

namespace clapper::ablation {

struct Spread {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> per_seed;
};

Spread spread_of(const std::vector<double>& values);

// One trained configuration: a strategy with or without the warm-up stage.
struct Arm {
  std::string name;
  compress::Strategy strategy = compress::Strategy::kTimePerceiver;
  bool warmup = true;
};

struct TrainedRun {
  train::RunRecord record;
  std::map<std::string, compress::ModelParams> params;  // task name -> final params
};

// Optional warm-up on caption regression, then one fine-tune per task starting
// from the same warmed parameters. Corpora depend only on seed and task.
TrainedRun train_run(const config::Config& config, const Arm& arm, std::uint64_t seed,
                     const std::vector<synth::TaskKind>& tasks);

// train_run for every arm and seed, on up to config.threads threads; results do
// not depend on the thread count. Records are indexed [arm][seed].
std::vector<std::vector<train::RunRecord>> run_arms(const config::Config& config,
                                                    const std::vector<Arm>& arms,
                                                    const std::vector<synth::TaskKind>& tasks);

struct StrategyRow {
  compress::Strategy strategy = compress::Strategy::kTimePerceiver;
  bench::Ratio ratio;                      // at config.frames and config.grid
  std::size_t tokens_per_video = 0;        // at config.frames and config.grid
  std::size_t full_grid_tokens_per_video = 0;  // at config.frames and grid 28
  std::map<std::string, Spread> accuracy;  // task name -> spread over seeds
  std::map<std::string, double> delta;     // mean minus baseline4x mean
};

struct AblationReport {
  config::Config config;
  std::vector<StrategyRow> rows;
  std::vector<train::RunRecord> runs;
};

// Compression ratio and token totals only; no training.
std::vector<StrategyRow> ratio_rows(const config::Config& config);

AblationReport run_ablation_suite(const config::Config& config);

struct StagingRow {
  Arm arm;
  Spread accuracy;
  double delta_vs_direct = 0.0;
};

struct StagingReport {
  config::Config config;
  synth::TaskKind task = synth::TaskKind::kChangeDirection;
  std::vector<StagingRow> rows;  // temporal-pool direct, timeperceiver direct, two-stage
  std::vector<train::RunRecord> runs;
};

std::vector<Arm> staging_arms();

// Throws ConfigError with fewer than three seeds.
StagingReport run_staging_ablation(const config::Config& config,
                                   synth::TaskKind task = synth::TaskKind::kChangeDirection);

std::vector<std::vector<std::string>> csv_rows(const AblationReport& report);
std::vector<std::vector<std::string>> csv_rows(const StagingReport& report);
nlohmann::json to_json(const AblationReport& report);
nlohmann::json to_json(const StagingReport& report);

}  // namespace clapper::ablation
