#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "clapper/compressors.hpp"
#include "clapper/synth.hpp"
#include "clapper/tape.hpp"

namespace clapper::video {

inline constexpr std::size_t kSegmentFrames = 4;

struct SamplingPlan {
  double duration = 0.0;  // seconds
  double rate = 1.0;      // frames per second
  std::size_t cap = 96;
  bool capped = false;
  std::vector<double> timestamps;  // seconds
};

// Samples at `rate`; when that would exceed `cap` frames, takes `cap` frames at
// the centres of equal bins over the whole duration.
SamplingPlan plan_sampling(double duration, double rate = 1.0, std::size_t cap = 96);

struct Segment {
  std::size_t first = 0;  // index of the keyframe in the sampled sequence
  std::size_t size = 0;   // 1..4

  std::size_t keyframe() const { return first; }
};

// Consecutive runs of 4 frames; only the last may be shorter.
std::vector<Segment> segmentize(std::size_t frames);

// Slow-fast packing: Kf per 1-frame segment, Kf + Q per longer segment.
std::size_t token_count(std::size_t frames, std::size_t keyframe_tokens = 196,
                        std::size_t temporal_tokens = 49);

// Tokens a strategy emits for `frames` sampled frames at grid side `grid`.
std::size_t strategy_token_count(compress::Strategy strategy, std::size_t frames, std::size_t grid,
                                 std::size_t queries = 0);

enum class BlockKind { kKeyframe, kTemporal, kFrame, kPooled };
std::string to_string(BlockKind kind);

struct TokenBlock {
  BlockKind kind = BlockKind::kKeyframe;
  std::size_t segment = 0;
  std::size_t offset = 0;  // first row in the concatenated token array
  std::size_t count = 0;
};

struct VideoTokenSequence {
  compress::Strategy strategy = compress::Strategy::kTimePerceiver;
  std::size_t frames = 0;
  std::vector<TokenBlock> blocks;
  std::size_t total_tokens = 0;
  Array tokens;  // [total_tokens x D]

  double tokens_per_frame() const;
  // Reported figure: the exact ratio rounded down.
  std::size_t tokens_per_frame_floor() const;
};

// Differentiable packing of a clip Var [T x G x G x D] into [N x D] tokens.
// `blocks`, when given, receives the block layout.
Var pack_tokens(Tape& tape, Var clip, const compress::BoundParams& params,
                const compress::CompressorSpec& spec, std::vector<TokenBlock>* blocks = nullptr);

VideoTokenSequence pack_video(const synth::FrameFeatureClip& clip,
                              const compress::CompressorSpec& spec,
                              const compress::ModelParams& params);

// Per-segment counts and offsets, without the token values.
nlohmann::json manifest(const VideoTokenSequence& sequence);

}  // namespace clapper::video
