#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "clapper/ablation.hpp"
#include "clapper/bench.hpp"
#include "clapper/checkpoint.hpp"
#include "clapper/config.hpp"
#include "clapper/errors.hpp"
#include "clapper/gradcheck.hpp"
#include "clapper/pipeline.hpp"
#include "clapper/random.hpp"

namespace {

namespace fs = std::filesystem;
using namespace clapper;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
};

struct Run {
  config::Config config;
  std::uint64_t seed = 0;
  fs::path dir;
};

// Loads the config, applies --seed and --out, and creates <out>/<command>-seed<N>.
Run prepare(const Common& common, const std::string& command) {
  Run run;
  if (!common.config_path.empty()) {
    run.config = config::load_config(common.config_path);
  }
  if (common.seed) {
    config::rebase_seeds(run.config, *common.seed);
  }
  if (!common.out.empty()) {
    run.config.out_dir = common.out;
  }
  run.seed = run.config.seeds.empty() ? 0 : run.config.seeds.front();
  run.dir = fs::path(run.config.out_dir) / (command + "-seed" + std::to_string(run.seed));
  fs::create_directories(run.dir);
  return run;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void finish(const Run& run, const std::vector<std::string>& files) {
  write_text(run.dir / "config.txt", config::to_text(run.config));
  for (const std::string& f : files) {
    std::cout << (run.dir / f).string() << "\n";
  }
}

void cmd_tokens(const Common& common, std::optional<std::size_t> frames_flag) {
  Run run = prepare(common, "tokens");
  config::Config& c = run.config;
  if (frames_flag) {
    c.frames = *frames_flag;
  }
  const std::size_t frames = c.frames;
  const synth::FrameFeatureClip clip =
      synth::mock_encode(frames, c.grid, c.channels, derive_seed(run.seed, 80, 0));
  std::vector<std::vector<std::string>> rows = {
      {"strategy", "frames", "grid", "tokens", "tokens_per_frame_floor", "compression_ratio",
       "compression_display", "full_grid_tokens"}};
  nlohmann::json manifests = nlohmann::json::array();
  for (const auto& row : ablation::ratio_rows(c)) {
    const compress::CompressorSpec spec = c.spec(row.strategy);
    const compress::ModelParams params = compress::init_params(spec, c.dims(), run.seed);
    const video::VideoTokenSequence seq = video::pack_video(clip, spec, params);
    if (seq.total_tokens != row.tokens_per_video) {
      throw std::logic_error("packed token total disagrees with token arithmetic");
    }
    rows.push_back({compress::to_string(row.strategy), std::to_string(frames),
                    std::to_string(c.grid), std::to_string(seq.total_tokens),
                    std::to_string(seq.tokens_per_frame_floor()),
                    bench::format_number(row.ratio.value), row.ratio.display,
                    std::to_string(row.full_grid_tokens_per_video)});
    manifests.push_back(video::manifest(seq));
  }
  write_text(run.dir / "tokens.csv", bench::to_csv(rows));
  write_json(run.dir / "tokens.json",
             {{"version", 1}, {"report", "tokens"}, {"frames", frames}, {"manifests", manifests}});
  finish(run, {"tokens.csv", "tokens.json"});
}

void cmd_budget(const Common& common, const std::vector<std::size_t>& budgets_flag) {
  Run run = prepare(common, "budget");
  if (!budgets_flag.empty()) {
    run.config.budgets = budgets_flag;
  }
  std::vector<bench::BudgetReport> reports;
  nlohmann::json skipped = nlohmann::json::array();
  for (const std::size_t budget : run.config.budgets) {
    const std::size_t before = reports.size();
    for (const bench::ModelProfile& p : bench::published_profiles()) {
      if (budget < p.cost(1)) {
        skipped.push_back({{"model", p.name}, {"budget", budget}});
        continue;
      }
      reports.push_back(bench::frames_under_budget(p, budget));
    }
    if (reports.size() == before) {
      throw InputError("budget " + std::to_string(budget) + " cannot hold one frame of any profile");
    }
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : reports) {
    rows.push_back(bench::to_json(r));
  }
  write_text(run.dir / "budget.csv", bench::to_csv(bench::budget_rows(reports)));
  write_json(run.dir / "budget.json",
             {{"version", 1}, {"report", "budget"}, {"rows", rows}, {"skipped", skipped}});
  finish(run, {"budget.csv", "budget.json"});
}

void cmd_report(const Common& common) {
  Run run = prepare(common, "report");
  const config::Config& c = run.config;
  const auto table =
      bench::emit_token_table(bench::published_profiles(), c.table_frames, c.budgets);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table) {
    rows.push_back(bench::to_json(r));
  }
  write_text(run.dir / "token_table.csv", bench::to_csv(bench::token_table_rows(table, c.budgets)));
  write_json(run.dir / "token_table.json", {{"version", 1},
                                            {"report", "token_table"},
                                            {"budgets", c.budgets},
                                            {"rows", rows}});

  std::vector<std::vector<std::string>> ratios = {
      {"strategy", "frames", "grid", "tokens_per_video", "compression_ratio", "compression_display"}};
  for (const auto& r : ablation::ratio_rows(c)) {
    ratios.push_back({compress::to_string(r.strategy), std::to_string(c.frames),
                      std::to_string(c.grid), std::to_string(r.tokens_per_video),
                      bench::format_number(r.ratio.value), r.ratio.display});
  }
  write_text(run.dir / "compression.csv", bench::to_csv(ratios));
  finish(run, {"token_table.csv", "token_table.json", "compression.csv"});
}

void cmd_ablate(const Common& common, bool staging) {
  Run run = prepare(common, staging ? "staging" : "ablate");
  if (staging) {
    const auto report = ablation::run_staging_ablation(run.config);
    write_text(run.dir / "staging.csv", bench::to_csv(ablation::csv_rows(report)));
    write_json(run.dir / "staging.json", ablation::to_json(report));
    finish(run, {"staging.csv", "staging.json"});
    return;
  }
  const auto report = ablation::run_ablation_suite(run.config);
  write_text(run.dir / "ablation.csv", bench::to_csv(ablation::csv_rows(report)));
  write_json(run.dir / "ablation.json", ablation::to_json(report));
  finish(run, {"ablation.csv", "ablation.json"});
}

void cmd_train(const Common& common, const std::string& strategy, bool direct) {
  Run run = prepare(common, "train");
  const ablation::Arm arm{strategy, compress::strategy_from_string(strategy), !direct};
  const ablation::TrainedRun trained =
      ablation::train_run(run.config, arm, run.seed, run.config.tasks);
  std::vector<std::string> files = {"run.json"};
  write_json(run.dir / "run.json", train::to_json(trained.record));
  for (const auto& [task, params] : trained.params) {
    const std::string name = task + ".ckpt";
    save_checkpoint(run.dir / name, params);
    files.push_back(name);
  }
  finish(run, files);
}

// Returns false when any strategy fails its check.
bool cmd_gradcheck(const Common& common) {
  Run run = prepare(common, "gradcheck");
  const config::Config& c = run.config;
  nlohmann::json reports = nlohmann::json::array();
  std::vector<std::vector<std::string>> rows = {
      {"strategy", "param", "elements", "max_relative_error", "passed"}};
  bool all_passed = true;
  for (const compress::Strategy s : c.strategies) {
    const check::GradCheckReport r =
        check::grad_check_model(c.spec(s), c.dims(), c.gradcheck_tolerance, run.seed);
    all_passed = all_passed && r.passed();
    for (const check::ParamCheck& p : r.params) {
      rows.push_back({r.subject, p.name, std::to_string(p.elements),
                      bench::format_number(p.max_relative_error), p.passed ? "yes" : "no"});
    }
    reports.push_back(check::to_json(r));
  }
  write_text(run.dir / "gradcheck.csv", bench::to_csv(rows));
  write_json(run.dir / "gradcheck.json",
             {{"version", 1}, {"report", "gradcheck"}, {"passed", all_passed}, {"reports", reports}});
  finish(run, {"gradcheck.csv", "gradcheck.json"});
  return all_passed;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Slow-fast video token compression toolkit"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Base seed (replaces the config seed list)");
    sub->add_option("--config", common.config_path, "key = value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "Output root (overrides out_dir)");
  };

  std::optional<std::size_t> frames;
  auto* tokens = app.add_subcommand("tokens", "Token counts and packing manifests per strategy");
  add_common(tokens);
  tokens->add_option("--frames", frames, "Sampled frame count")->check(CLI::PositiveNumber);

  std::vector<std::size_t> budgets;
  auto* budget = app.add_subcommand("budget", "Maximal frames under token budgets");
  add_common(budget);
  budget->add_option("--budget", budgets, "Token budgets (repeatable)")
      ->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Token table and compression-ratio column");
  add_common(report);

  bool staging = false;
  auto* ablate = app.add_subcommand("ablate", "Strategy ablation suite");
  add_common(ablate);
  ablate->add_flag("--staging", staging, "Run the warm-up ablation instead");

  std::string strategy = "timeperceiver";
  bool direct = false;
  auto* trainer = app.add_subcommand("train", "Train one strategy and save checkpoints");
  add_common(trainer);
  trainer->add_option("--strategy", strategy, "Strategy name");
  trainer->add_flag("--direct", direct, "Skip the warm-up stage");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  add_common(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (tokens->parsed()) {
    cmd_tokens(common, frames);
  } else if (budget->parsed()) {
    cmd_budget(common, budgets);
  } else if (report->parsed()) {
    cmd_report(common);
  } else if (ablate->parsed()) {
    cmd_ablate(common, staging);
  } else if (trainer->parsed()) {
    cmd_train(common, strategy, direct);
  } else if (gradcheck->parsed()) {
    if (!cmd_gradcheck(common)) {
      std::cerr << "gradient check failed\n";
      return 2;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const clapper::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
