// Runs every acceptance criterion at its stated tolerance and time limit and
// prints one PASS/FAIL line per criterion. Exit status is 0 only if all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "clapper/ablation.hpp"
#include "clapper/bench.hpp"
#include "clapper/compressors.hpp"
#include "clapper/config.hpp"
#include "clapper/gradcheck.hpp"
#include "clapper/pipeline.hpp"
#include "clapper/random.hpp"

namespace {

namespace fs = std::filesystem;
using namespace clapper;
using compress::Strategy;

struct Outcome {
  bool passed = false;
  std::string detail;
};

Array random_clip(Shape shape, std::uint64_t seed) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    n *= d;
  }
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) {
    x = rng.uniform(-1.0, 1.0);
  }
  return Array(std::move(shape), std::move(v));
}

Array permute_frames(const Array& clip, const std::vector<std::size_t>& order) {
  const std::size_t frame = clip.size() / clip.dim(0);
  const auto v = clip.values();
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t t : order) {
    out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(t * frame),
               v.begin() + static_cast<std::ptrdiff_t>((t + 1) * frame));
  }
  return Array(clip.shape(), std::move(out));
}

std::string num(double v) { return bench::format_number(v); }

Outcome token_arithmetic() {
  const std::size_t one = video::token_count(1);
  const std::size_t full = video::token_count(4);
  const std::size_t at96 = video::token_count(96);
  const std::size_t floor_per_frame = at96 / 96;
  bool ok = one == 196 && full == 245 && at96 == 5880 && floor_per_frame == 61;
  for (std::size_t t : {2u, 3u}) {
    ok = ok && video::token_count(t) == 245;
  }
  return {ok, "1 frame " + std::to_string(one) + ", segment " + std::to_string(full) +
                  ", 96 frames " + std::to_string(at96) + ", floor/frame " +
                  std::to_string(floor_per_frame)};
}

Outcome budget_suite() {
  const bench::ModelProfile clapper = bench::clapper_profile();
  const std::size_t at2k = bench::frames_under_budget(clapper, 2000).frames;
  const std::size_t at6k = bench::frames_under_budget(clapper, 6000).frames;
  std::size_t mismatches = 0;
  for (std::size_t budget = 196; budget <= 10000; ++budget) {
    std::size_t scan = 0;
    while (video::token_count(scan + 1) <= budget) {
      ++scan;
    }
    mismatches += bench::frames_under_budget(clapper, budget).frames != scan;
  }
  return {at2k == 32 && at6k == 96 && mismatches == 0,
          "2k -> " + std::to_string(at2k) + ", 6k -> " + std::to_string(at6k) +
              ", oracle mismatches " + std::to_string(mismatches) + "/9805"};
}

Outcome ratio_suite() {
  const auto rows = ablation::ratio_rows(config::Config{});
  const std::vector<double> exact = {4.0, 16.0, 16.0, 12.8, 12.8};
  const std::vector<std::string> shown = {"4x", "16x", "16x", "13x", "13x"};
  bool ok = rows.size() == exact.size();
  std::string detail;
  for (std::size_t i = 0; i < rows.size() && ok; ++i) {
    ok = rows[i].ratio.value == exact[i] && rows[i].ratio.display == shown[i];
    detail += compress::to_string(rows[i].strategy) + "=" + num(rows[i].ratio.value) + "/" +
              rows[i].ratio.display + " ";
  }
  return {ok, detail};
}

Outcome shape_contracts() {
  compress::CompressorSpec spec;
  const compress::ModelParams p = compress::init_params(spec, {28, 1152, 4}, 0);
  bool ok = true;
  std::string detail;
  for (std::size_t t : {2u, 3u, 4u}) {
    const Array out = compress::timeperceiver_forward(random_clip({t, 28, 28, 1152}, t), p);
    ok = ok && out.shape() == Shape{49, 1152};
    detail += "T=" + std::to_string(t) + ": " + std::to_string(out.dim(0)) + "x" +
              std::to_string(out.dim(1)) + " ";
  }
  return {ok, detail};
}

Outcome gradient_verification() {
  const config::Config c;
  double worst = 0.0;
  std::size_t params = 0;
  bool ok = true;
  for (const Strategy s : compress::all_strategies()) {
    const check::GradCheckReport r = check::grad_check_model(c.spec(s), c.dims(), 1e-4, 0);
    ok = ok && r.passed();
    worst = std::max(worst, r.max_relative_error());
    params += r.params.size();
  }
  return {ok, "G=8 D=16, 5 strategies, " + std::to_string(params) +
                  " arrays, max rel err " + num(worst)};
}

Outcome permutation_dichotomy() {
  compress::CompressorSpec spec;
  spec.temporal_position = false;
  const compress::ModelParams off = compress::init_params(spec, {8, 16, 4}, 1);
  spec.temporal_position = true;
  const compress::ModelParams on = compress::init_params(spec, {8, 16, 4}, 1);
  double worst_off = 0.0;
  double weakest_on = INFINITY;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Array clip = random_clip({4, 8, 8, 16}, seed);
    const Array ref_off = compress::timeperceiver_forward(clip, off);
    const Array ref_on = compress::timeperceiver_forward(clip, on);
    double best_on = 0.0;
    std::vector<std::size_t> order = {0, 1, 2, 3};
    do {
      const Array moved = permute_frames(clip, order);
      worst_off = std::max(worst_off, max_abs_diff(compress::timeperceiver_forward(moved, off), ref_off));
      best_on = std::max(best_on, max_abs_diff(compress::timeperceiver_forward(moved, on), ref_on));
    } while (std::next_permutation(order.begin(), order.end()));
    weakest_on = std::min(weakest_on, best_on);
  }
  return {worst_off < 1e-9 && weakest_on > 1e-6,
          "positions off: max diff " + num(worst_off) + " over 24 orders x 3 clips; on: " +
              "largest diff per clip >= " + num(weakest_on)};
}

Outcome information_retention() {
  const ablation::AblationReport r = ablation::run_ablation_suite(config::Config{});
  std::map<Strategy, const ablation::StrategyRow*> by;
  for (const auto& row : r.rows) {
    by[row.strategy] = &row;
  }
  const ablation::Spread& pool = by[Strategy::kTemporalPool]->accuracy.at("change-direction");
  const ablation::Spread& tp = by[Strategy::kTimePerceiver]->accuracy.at("change-direction");
  const double spatial = by[Strategy::kSpatialPool]->accuracy.at("changed-cell").mean;
  double weakest_keyframe = INFINITY;
  for (const Strategy s : {Strategy::kBaseline4x, Strategy::kTemporalPool, Strategy::kPerceiver,
                           Strategy::kTimePerceiver}) {
    weakest_keyframe = std::min(weakest_keyframe, by[s]->accuracy.at("changed-cell").mean);
  }
  const bool chance = pool.min >= 0.45 && pool.max <= 0.55;
  const bool learned = tp.mean > 0.90;
  const bool cells = weakest_keyframe - spatial >= 0.10;
  return {chance && learned && cells,
          "3 seeds; temporal-pool direction " + num(pool.min) + ".." + num(pool.max) +
              "; two-stage timeperceiver direction mean " + num(tp.mean) + " (min " +
              num(tp.min) + "); changed-cell spatial-pool " + num(spatial) +
              " vs weakest keyframe strategy " + num(weakest_keyframe)};
}

Outcome staging_benefit() {
  const ablation::StagingReport r = ablation::run_staging_ablation(config::Config{});
  const double direct = r.rows[1].accuracy.mean;
  const double staged = r.rows[2].accuracy.mean;
  return {staged >= direct, "3 seeds; temporal-pool " + num(r.rows[0].accuracy.mean) +
                                ", direct " + num(direct) + ", two-stage " + num(staged)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      files[fs::relative(e.path(), dir).string()] = ss.str();
    }
  }
  return files;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "clapper_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path quick = root / "quick.cfg";
  std::ofstream(quick) << "grid = 4\nchannels = 8\nheads = 2\nframes = 16\n"
                          "stage1_samples = 200\nstage2_samples = 200\ntest_samples = 100\n";
  const std::vector<std::string> commands = {
      "tokens", "budget", "report", "gradcheck --config " + quick.string(),
      "train --config " + quick.string(), "ablate --config " + quick.string(),
      "ablate --staging --config " + quick.string()};
  std::size_t files = 0;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::map<std::string, std::string> outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = root / (std::to_string(i) + "_" + std::to_string(rep));
      const std::string cmd = std::string(CLAPPER_CLI_PATH) + " " + commands[i] +
                              " --seed 7 --out " + out.string() + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        return {false, "'" + commands[i] + "' exited non-zero"};
      }
      outputs[rep] = snapshot(out);
    }
    if (outputs[0].empty() || outputs[0] != outputs[1]) {
      return {false, "'" + commands[i] + "' outputs differ between runs"};
    }
    files += outputs[0].size();
  }
  fs::remove_all(root);
  return {true, std::to_string(commands.size()) + " invocations, " + std::to_string(files) +
                    " files byte-identical on rerun"};
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // 0: no limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "token arithmetic", 1.0, token_arithmetic},
      {2, "budget suite", 5.0, budget_suite},
      {3, "compression ratio", 1.0, ratio_suite},
      {4, "shape contracts", 30.0, shape_contracts},
      {5, "gradient verification", 120.0, gradient_verification},
      {6, "permutation dichotomy", 60.0, permutation_dichotomy},
      {7, "information retention", 900.0, information_retention},
      {8, "staging benefit", 1200.0, staging_benefit},
      {9, "determinism", 0.0, determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_seconds == 0.0 || seconds < c.limit_seconds;
    const bool passed = outcome.passed && in_time;
    failures += passed ? 0 : 1;
    char timing[64];
    if (c.limit_seconds > 0.0) {
      std::snprintf(timing, sizeof timing, "%.2fs < %.0fs", seconds, c.limit_seconds);
    } else {
      std::snprintf(timing, sizeof timing, "%.2fs", seconds);
    }
    std::printf("%s %d %s [%s]%s: %s\n", passed ? "PASS" : "FAIL", c.id, c.name.c_str(), timing,
                in_time ? "" : " over time limit", outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
