#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

const fs::path kRoot = fs::path(::testing::TempDir()) / "clapper_cli_test";

// Small enough that every training command finishes in seconds.
constexpr char kQuickConfig[] =
    "strategies = temporal-pool, timeperceiver\n"
    "grid = 4\n"
    "channels = 8\n"
    "heads = 2\n"
    "frames = 16\n"
    "seeds = 0,1,2\n"
    "stage1_samples = 40\n"
    "stage1_epochs = 1\n"
    "stage2_samples = 40\n"
    "test_samples = 40\n"
    "budgets = 300, 2000\n"
    "table_frames = 4, 96\n";

int run(const std::string& args) {
  const std::string cmd = std::string(CLAPPER_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every file under dir, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = read(e.path());
    }
  }
  return files;
}

fs::path quick_config() {
  fs::create_directories(kRoot);
  const fs::path path = kRoot / "quick.cfg";
  std::ofstream(path) << kQuickConfig;
  return path;
}

class DeterminismTest : public ::testing::TestWithParam<std::string> {};

TEST_P(DeterminismTest, RerunIsByteIdentical) {
  const fs::path cfg = quick_config();
  const std::string name = GetParam() == "ablate --staging"
                               ? "staging"
                               : GetParam().substr(0, GetParam().find(' '));
  const fs::path a = kRoot / (name + "_a"), b = kRoot / (name + "_b");
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string common = " --seed 3 --config " + cfg.string() + " --out ";
  ASSERT_EQ(run(GetParam() + common + a.string()), 0);
  ASSERT_EQ(run(GetParam() + common + b.string()), 0);
  const auto first = snapshot(a), second = snapshot(b);
  ASSERT_FALSE(first.empty());
  EXPECT_EQ(first, second);
  for (const auto& [file, body] : first) {
    EXPECT_EQ(file.rfind(name + "-seed3/", 0), 0u) << file;
  }
}

INSTANTIATE_TEST_SUITE_P(Subcommands, DeterminismTest,
                         ::testing::Values("tokens", "budget", "report", "gradcheck", "train",
                                           "ablate", "ablate --staging"),
                         [](const auto& info) {
                           std::string n = info.param;
                           std::erase(n, ' ');
                           std::erase(n, '-');
                           return n;
                         });

TEST(CliTest, AblationReportHasOneRowPerStrategy) {
  const fs::path cfg = quick_config();
  const fs::path out = kRoot / "rows";
  fs::remove_all(out);
  ASSERT_EQ(run("ablate --config " + cfg.string() + " --out " + out.string()), 0);
  const std::string csv = read(out / "ablate-seed0" / "ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("temporal-pool,16,16x,"), std::string::npos);
  EXPECT_NE(csv.find("timeperceiver,12.8,13x,"), std::string::npos);
  const auto j = nlohmann::json::parse(read(out / "ablate-seed0" / "ablation.json"));
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["runs"].size(), 6u);
}

TEST(CliTest, BudgetFlagsSkipProfilesThatCannotFit) {
  const fs::path out = kRoot / "budget";
  fs::remove_all(out);
  ASSERT_EQ(run("budget --budget 300 --budget 6000 --out " + out.string()), 0);
  const auto j = nlohmann::json::parse(read(out / "budget-seed0" / "budget.json"));
  EXPECT_EQ(j["skipped"].size(), 1u);  // 400 tokens per frame at 300
  const std::string csv = read(out / "budget-seed0" / "budget.csv");
  EXPECT_NE(csv.find("LLaVA-Video,constant,196,6000,30,5880,30,32,187,yes"), std::string::npos);
  EXPECT_NE(csv.find("Clapper,segment,61,6000,96,5880,98,96,62,no"), std::string::npos);
}

TEST(CliTest, TrainWritesRecordAndCheckpoints) {
  const fs::path cfg = quick_config();
  const fs::path out = kRoot / "train";
  fs::remove_all(out);
  ASSERT_EQ(run("train --direct --strategy perceiver --config " + cfg.string() + " --out " +
                out.string()),
            0);
  const fs::path dir = out / "train-seed0";
  EXPECT_TRUE(fs::exists(dir / "change-direction.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "changed-cell.ckpt"));
  const auto j = nlohmann::json::parse(read(dir / "run.json"));
  EXPECT_EQ(j["strategy"], "perceiver");
  EXPECT_EQ(j["stages"].size(), 2u);
}

TEST(CliTest, ExitCodes) {
  const fs::path out = kRoot / "codes";
  EXPECT_EQ(run("tokens --out " + out.string()), 0);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("tokens --config /nonexistent.cfg"), 1);
  EXPECT_EQ(run("budget --budget 1 --out " + out.string()), 1);  // fits no profile
  const fs::path bad = kRoot / "bad.cfg";
  std::ofstream(bad) << "strategies = avgpool\n";
  EXPECT_EQ(run("ablate --config " + bad.string()), 1);
  std::ofstream(bad) << "seeds = 1\n";
  EXPECT_EQ(run("ablate --staging --config " + bad.string() + " --out " + out.string()), 1);
  EXPECT_EQ(run("train --strategy avgpool --out " + out.string()), 1);
}

}  // namespace
