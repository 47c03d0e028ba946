#include "clapper/bench.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "clapper/errors.hpp"
#include "clapper/pipeline.hpp"

namespace clapper::bench {
namespace {

constexpr std::size_t kClapperKeyframe = 196;
constexpr std::size_t kClapperTemporal = 49;
constexpr std::size_t kClapperSegment = kClapperKeyframe + kClapperTemporal;

std::string count(std::size_t n) { return std::to_string(n); }

}  // namespace

Ratio compression_ratio(std::int64_t n_original, std::int64_t n_compressed) {
  if (n_original <= 0 || n_compressed <= 0) {
    throw InputError("compression ratio needs positive token counts, got " +
                     std::to_string(n_original) + " / " + std::to_string(n_compressed));
  }
  const double value = static_cast<double>(n_original) / static_cast<double>(n_compressed);
  return {value, ratio_display(value)};
}

std::string ratio_display(double ratio) {
  return std::to_string(static_cast<long long>(std::llround(ratio))) + "x";
}

std::size_t ModelProfile::cost(std::size_t frames) const {
  if (frames == 0) {
    return 0;
  }
  if (rule == TokenRule::kClapper) {
    return video::token_count(frames, kClapperKeyframe, kClapperTemporal);
  }
  return frames * tokens_per_frame;
}

std::size_t ModelProfile::listed_tokens_per_frame() const {
  if (rule == TokenRule::kClapper) {
    // whole segments: 245 tokens per 4 frames, rounded down
    return kClapperSegment / video::kSegmentFrames;
  }
  return tokens_per_frame;
}

ModelProfile clapper_profile() {
  return {"Clapper", TokenRule::kClapper, 0, "keyframe 196 + temporal 49 per 4-frame segment"};
}

std::vector<ModelProfile> published_profiles() {
  const auto constant = [](std::string name, std::size_t tpf) {
    return ModelProfile{std::move(name), TokenRule::kConstant, tpf, "published tokens per frame"};
  };
  return {clapper_profile(),
          constant("IXComposer-2.5", 400),
          constant("InternVL2", 256),
          constant("InternVL2.5", 256),
          constant("Kangaroo", 256),
          constant("LongVILA", 196),
          constant("LLaVA-Video", 196),
          constant("LLaVA-OneVision", 196),
          constant("LLaVA-NeXT-Video", 144),
          constant("LongVA", 144),
          constant("LongLLaVA", 144),
          constant("MiniCPM-V-2.6", 96),
          constant("VideoLLaMA2", 72),
          constant("VideoChat2-HD", 72),
          constant("InternVideo2-HD", 72),
          constant("LongVU", 64),
          constant("LLaMA-VID", 2)};
}

ModelProfile find_profile(const std::string& name) {
  for (const ModelProfile& p : published_profiles()) {
    if (p.name == name) {
      return p;
    }
  }
  throw InputError("unknown model profile '" + name + "'");
}

std::vector<PublishedFrames> published_budget_frames() {
  return {{"InternVideo2-HD", 2000, 32}, {"LLaVA-Video", 2000, 10}, {"Clapper", 2000, 32},
          {"MiniCPM-V-2.6", 6000, 64},   {"LLaVA-Video", 6000, 32}, {"Clapper", 6000, 96}};
}

BudgetReport frames_under_budget(const ModelProfile& profile, std::size_t budget) {
  if (budget < profile.cost(1)) {
    throw InputError("budget of " + count(budget) + " tokens cannot hold one frame of " +
                     profile.name + " (" + count(profile.cost(1)) + " tokens)");
  }
  BudgetReport r;
  r.profile = profile;
  r.budget = budget;
  if (profile.rule == TokenRule::kClapper) {
    const std::size_t segments = budget / kClapperSegment;
    const std::size_t rest = budget - segments * kClapperSegment;
    // a leftover of at least one keyframe block buys a 1-frame segment
    r.frames = segments * video::kSegmentFrames + (rest >= kClapperKeyframe ? 1 : 0);
  } else {
    r.frames = budget / profile.tokens_per_frame;
  }
  r.tokens = profile.cost(r.frames);
  r.naive_frames = budget / profile.listed_tokens_per_frame();
  for (const PublishedFrames& p : published_budget_frames()) {
    if (p.model == profile.name && p.budget == budget) {
      r.published_frames = p.frames;
      r.published_implied_tokens_per_frame = budget / p.frames;
      r.discrepancy = p.frames != r.frames;
    }
  }
  return r;
}

std::string thousands_display(std::size_t tokens) { return count((tokens + 500) / 1000) + "k"; }

std::vector<TokenTableRow> emit_token_table(const std::vector<ModelProfile>& profiles,
                                            const std::vector<std::size_t>& frame_counts,
                                            const std::vector<std::size_t>& budgets) {
  std::vector<TokenTableRow> rows;
  for (const ModelProfile& p : profiles) {
    for (std::size_t frames : frame_counts) {
      TokenTableRow row;
      row.model = p.name;
      row.listed_tokens_per_frame = p.listed_tokens_per_frame();
      row.frames = frames;
      row.tokens = p.cost(frames);
      row.display = thousands_display(row.tokens);
      for (std::size_t b : budgets) {
        row.within_budget.push_back(row.tokens <= b);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) {
    throw InputError("cannot format number");
  }
  return std::string(buf.data(), end);
}

std::string to_csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) {
        out += ',';
      }
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

std::vector<std::vector<std::string>> budget_rows(const std::vector<BudgetReport>& reports) {
  std::vector<std::vector<std::string>> rows = {
      {"model", "rule", "listed_tokens_per_frame", "budget", "frames", "tokens", "naive_frames",
       "published_frames", "published_implied_tokens_per_frame", "discrepancy"}};
  for (const BudgetReport& r : reports) {
    rows.push_back({r.profile.name,
                    r.profile.rule == TokenRule::kClapper ? "segment" : "constant",
                    count(r.profile.listed_tokens_per_frame()), count(r.budget), count(r.frames),
                    count(r.tokens), count(r.naive_frames),
                    r.published_frames ? count(*r.published_frames) : "",
                    r.published_implied_tokens_per_frame
                        ? count(*r.published_implied_tokens_per_frame)
                        : "",
                    r.discrepancy ? "yes" : "no"});
  }
  return rows;
}

std::vector<std::vector<std::string>> token_table_rows(const std::vector<TokenTableRow>& rows,
                                                       const std::vector<std::size_t>& budgets) {
  std::vector<std::string> header = {"model", "listed_tokens_per_frame", "frames", "tokens",
                                     "display"};
  for (std::size_t b : budgets) {
    header.push_back("within_" + count(b));
  }
  std::vector<std::vector<std::string>> out = {header};
  for (const TokenTableRow& r : rows) {
    std::vector<std::string> line = {r.model, count(r.listed_tokens_per_frame), count(r.frames),
                                     count(r.tokens), r.display};
    for (bool ok : r.within_budget) {
      line.push_back(ok ? "yes" : "no");
    }
    out.push_back(std::move(line));
  }
  return out;
}

nlohmann::json to_json(const BudgetReport& r) {
  nlohmann::json j = {{"model", r.profile.name},
                      {"rule", r.profile.rule == TokenRule::kClapper ? "segment" : "constant"},
                      {"listed_tokens_per_frame", r.profile.listed_tokens_per_frame()},
                      {"budget", r.budget},
                      {"frames", r.frames},
                      {"tokens", r.tokens},
                      {"naive_frames", r.naive_frames},
                      {"discrepancy", r.discrepancy}};
  j["published_frames"] = r.published_frames ? nlohmann::json(*r.published_frames) : nullptr;
  j["published_implied_tokens_per_frame"] =
      r.published_implied_tokens_per_frame ? nlohmann::json(*r.published_implied_tokens_per_frame)
                                           : nullptr;
  return j;
}

nlohmann::json to_json(const TokenTableRow& r) {
  return {{"model", r.model},
          {"listed_tokens_per_frame", r.listed_tokens_per_frame},
          {"frames", r.frames},
          {"tokens", r.tokens},
          {"display", r.display},
          {"within_budget", r.within_budget}};
}

}  // namespace clapper::bench
