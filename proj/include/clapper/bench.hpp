#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace clapper::bench {

struct Ratio {
  double value = 0.0;
  std::string display;  // nearest integer with an "x" suffix
};

// N_original / N_compressed. Throws InputError unless both are positive.
Ratio compression_ratio(std::int64_t n_original, std::int64_t n_compressed);
std::string ratio_display(double ratio);

enum class TokenRule { kConstant, kClapper };

struct ModelProfile {
  std::string name;
  TokenRule rule = TokenRule::kConstant;
  std::size_t tokens_per_frame = 0;  // constant rule only
  std::string source;

  // Exact visual tokens for `frames` sampled frames.
  std::size_t cost(std::size_t frames) const;
  // Per-frame figure as tables list it (61 for the Clapper rule).
  std::size_t listed_tokens_per_frame() const;
};

ModelProfile clapper_profile();
// Clapper plus every published constant-rate model profile.
std::vector<ModelProfile> published_profiles();
// Throws InputError for an unknown name.
ModelProfile find_profile(const std::string& name);

// A frame count reported for a model under a token budget.
struct PublishedFrames {
  std::string model;
  std::size_t budget = 0;
  std::size_t frames = 0;
};
std::vector<PublishedFrames> published_budget_frames();

struct BudgetReport {
  ModelProfile profile;
  std::size_t budget = 0;
  std::size_t frames = 0;          // maximal admissible frame count
  std::size_t tokens = 0;          // cost(frames)
  std::size_t naive_frames = 0;    // budget / listed tokens-per-frame
  std::optional<std::size_t> published_frames;
  // Largest per-frame cost under which the published count would fit.
  std::optional<std::size_t> published_implied_tokens_per_frame;
  bool discrepancy = false;  // published count differs from `frames`
};

// Maximal frames with cost(frames) <= budget. Throws InputError when even one
// frame does not fit.
BudgetReport frames_under_budget(const ModelProfile& profile, std::size_t budget);

// 5880 -> "6k": nearest thousand.
std::string thousands_display(std::size_t tokens);

struct TokenTableRow {
  std::string model;
  std::size_t listed_tokens_per_frame = 0;
  std::size_t frames = 0;
  std::size_t tokens = 0;
  std::string display;
  std::vector<bool> within_budget;  // one flag per budget
};

std::vector<TokenTableRow> emit_token_table(const std::vector<ModelProfile>& profiles,
                                            const std::vector<std::size_t>& frame_counts,
                                            const std::vector<std::size_t>& budgets);

// Locale-independent shortest round-trip formatting.
std::string format_number(double value);

// Comma-separated rows; the first row is the header.
std::string to_csv(const std::vector<std::vector<std::string>>& rows);

std::vector<std::vector<std::string>> budget_rows(const std::vector<BudgetReport>& reports);
std::vector<std::vector<std::string>> token_table_rows(const std::vector<TokenTableRow>& rows,
                                                       const std::vector<std::size_t>& budgets);

nlohmann::json to_json(const BudgetReport& report);
nlohmann::json to_json(const TokenTableRow& row);

}  // namespace clapper::bench
