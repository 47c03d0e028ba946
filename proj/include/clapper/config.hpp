#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "clapper/compressors.hpp"
#include "clapper/synth.hpp"

namespace clapper::config {

// Flat `key = value` file. Lists are comma-separated; `#` starts a comment.
// Every key is optional and falls back to the default below.
struct Config {
  std::vector<compress::Strategy> strategies{compress::all_strategies().begin(),
                                             compress::all_strategies().end()};
  std::vector<synth::TaskKind> tasks = {synth::TaskKind::kChangeDirection,
                                        synth::TaskKind::kChangedCell};
  std::size_t grid = 8;
  std::size_t channels = 16;
  std::size_t frames = 64;  // T used for tokens/video and compression ratios
  std::size_t heads = 4;
  std::size_t depth = 1;
  std::size_t ffn_mult = 4;
  bool temporal_position = true;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::vector<std::size_t> budgets = {2000, 6000};
  std::vector<std::size_t> table_frames = {16, 32, 64, 96};
  std::size_t stage1_samples = 2000;
  std::size_t stage1_epochs = 5;
  std::size_t stage1_batch = 8;
  std::size_t stage2_samples = 3000;
  std::size_t stage2_epochs = 1;
  std::size_t stage2_batch = 16;
  std::size_t test_samples = 1000;
  double learning_rate = 1e-3;
  bool warmup = true;  // ablation suite: two-stage recipe for every strategy
  std::size_t threads = 1;
  double gradcheck_tolerance = 1e-4;
  std::string out_dir = "clapper-out";

  compress::CompressorSpec spec(compress::Strategy strategy) const;
  compress::ModelDims dims() const;
};

// Throws ConfigError on unknown or repeated keys and malformed values.
Config parse_config(std::istream& in);
Config load_config(const std::filesystem::path& path);

// Canonical text form of every key except out_dir, so runs written to
// different locations compare equal. parse_config(to_text(c)) reproduces c
// apart from out_dir.
std::string to_text(const Config& config);

// Replaces the seed list with `base, base+1, ...`, keeping its length.
void rebase_seeds(Config& config, std::uint64_t base);

}  // namespace clapper::config
