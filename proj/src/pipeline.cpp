#include "clapper/pipeline.hpp"

#include <cmath>

#include "clapper/errors.hpp"
#include "clapper/ops.hpp"

namespace clapper::video {

using compress::Strategy;

SamplingPlan plan_sampling(double duration, double rate, std::size_t cap) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw InputError("video duration must be positive");
  }
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw InputError("sample rate must be positive");
  }
  if (cap == 0) {
    throw InputError("frame cap must be at least 1");
  }
  SamplingPlan plan{duration, rate, cap, false, {}};
  const double at_rate = std::floor(duration * rate);
  if (at_rate > static_cast<double>(cap)) {
    plan.capped = true;
    const double bin = duration / static_cast<double>(cap);
    for (std::size_t i = 0; i < cap; ++i) {
      plan.timestamps.push_back((static_cast<double>(i) + 0.5) * bin);
    }
    return plan;
  }
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(at_rate));
  for (std::size_t i = 0; i < n; ++i) {
    plan.timestamps.push_back(static_cast<double>(i) / rate);
  }
  return plan;
}

std::vector<Segment> segmentize(std::size_t frames) {
  if (frames == 0) {
    throw InputError("cannot segment a video with no frames");
  }
  std::vector<Segment> out;
  for (std::size_t first = 0; first < frames; first += kSegmentFrames) {
    out.push_back(Segment{first, std::min(kSegmentFrames, frames - first)});
  }
  return out;
}

std::size_t token_count(std::size_t frames, std::size_t keyframe_tokens,
                        std::size_t temporal_tokens) {
  std::size_t total = 0;
  for (const Segment& s : segmentize(frames)) {
    total += s.size == 1 ? keyframe_tokens : keyframe_tokens + temporal_tokens;
  }
  return total;
}

std::size_t strategy_token_count(Strategy strategy, std::size_t frames, std::size_t grid,
                                 std::size_t queries) {
  if (grid == 0 || grid % 4 != 0) {
    throw ConfigError("grid side must be a positive multiple of 4, got " + std::to_string(grid));
  }
  const std::size_t keyframe = (grid / 2) * (grid / 2);
  const std::size_t coarse = (grid / 4) * (grid / 4);
  switch (strategy) {
    case Strategy::kBaseline4x:
      return frames * keyframe;
    case Strategy::kTemporalPool:
      return segmentize(frames).size() * keyframe;
    case Strategy::kSpatialPool:
      return frames * coarse;
    case Strategy::kPerceiver:
    case Strategy::kTimePerceiver:
      return token_count(frames, keyframe, queries == 0 ? coarse : queries);
  }
  throw ConfigError("unknown strategy");
}

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kKeyframe:
      return "keyframe";
    case BlockKind::kTemporal:
      return "temporal";
    case BlockKind::kFrame:
      return "frame";
    case BlockKind::kPooled:
      return "pooled";
  }
  return "unknown";
}

double VideoTokenSequence::tokens_per_frame() const {
  return frames == 0 ? 0.0 : static_cast<double>(total_tokens) / static_cast<double>(frames);
}

std::size_t VideoTokenSequence::tokens_per_frame_floor() const {
  return frames == 0 ? 0 : total_tokens / frames;
}

Var pack_tokens(Tape& tape, Var clip, const compress::BoundParams& params,
                const compress::CompressorSpec& spec, std::vector<TokenBlock>* blocks) {
  const Shape shape = tape.shape(clip);
  if (shape.size() != 4 || shape[1] != shape[2]) {
    throw DimensionError("clip must be [T x G x G x D], got " + shape_string(shape));
  }
  const std::size_t frames = shape[0], grid = shape[1], channels = shape[3];
  if (grid % 4 != 0) {
    throw ConfigError("grid side " + std::to_string(grid) + " is not divisible by 4");
  }
  const std::size_t frame_size = grid * grid * channels;
  const Var flat = ad::reshape(tape, clip, {frames, frame_size});
  const auto frames_of = [&](std::size_t first, std::size_t count) {
    return ad::reshape(tape, ad::slice_rows(tape, flat, first, first + count),
                       {count, grid, grid, channels});
  };
  const auto frame_at = [&](std::size_t t) {
    return ad::reshape(tape, ad::slice_rows(tape, flat, t, t + 1), {grid, grid, channels});
  };

  std::vector<Var> parts;
  std::size_t offset = 0;
  const auto emit = [&](Var block, BlockKind kind, std::size_t segment) {
    const std::size_t rows = tape.shape(block)[0];
    if (blocks != nullptr) {
      blocks->push_back(TokenBlock{kind, segment, offset, rows});
    }
    offset += rows;
    parts.push_back(block);
  };

  const std::vector<Segment> segments = segmentize(frames);
  for (std::size_t si = 0; si < segments.size(); ++si) {
    const Segment& seg = segments[si];
    switch (spec.strategy) {
      case Strategy::kBaseline4x:
        for (std::size_t t = seg.first; t < seg.first + seg.size; ++t) {
          emit(compress::keyframe_compress(tape, frame_at(t)), BlockKind::kFrame, si);
        }
        break;
      case Strategy::kSpatialPool:
        for (std::size_t t = seg.first; t < seg.first + seg.size; ++t) {
          emit(compress::spatial_pool_compress(tape, frame_at(t)), BlockKind::kFrame, si);
        }
        break;
      case Strategy::kTemporalPool:
        emit(compress::temporal_pool_compress(tape, frames_of(seg.first, seg.size)),
             BlockKind::kPooled, si);
        break;
      case Strategy::kPerceiver:
      case Strategy::kTimePerceiver:
        emit(compress::keyframe_compress(tape, frame_at(seg.keyframe())), BlockKind::kKeyframe,
             si);
        if (seg.size > 1) {
          const Var window = frames_of(seg.first, seg.size);
          const Var temporal = spec.strategy == Strategy::kTimePerceiver
                                   ? compress::timeperceiver_forward(tape, window, params, spec)
                                   : compress::perceiver_forward(tape, window, params, spec);
          emit(temporal, BlockKind::kTemporal, si);
        }
        break;
    }
  }
  return ad::concat_rows(tape, parts);
}

VideoTokenSequence pack_video(const synth::FrameFeatureClip& clip,
                              const compress::CompressorSpec& spec,
                              const compress::ModelParams& params) {
  if (compress::is_learned(spec.strategy)) {
    if (params.spec.strategy != spec.strategy) {
      throw ConfigError("parameters were built for " + compress::to_string(params.spec.strategy) +
                        ", packing asked for " + compress::to_string(spec.strategy));
    }
    if (params.dims.channels != clip.channels) {
      throw ConfigError("parameters expect " + std::to_string(params.dims.channels) +
                        " channels, clip has " + std::to_string(clip.channels));
    }
    if (compress::query_count(spec, clip.grid) != compress::query_count(params.spec, params.dims.grid)) {
      throw ConfigError("query count of the parameters does not match the clip grid");
    }
  }
  Tape tape;
  tape.set_grad_enabled(false);
  const compress::BoundParams bound = compress::bind(tape, params);
  VideoTokenSequence seq;
  seq.strategy = spec.strategy;
  seq.frames = clip.frames;
  const Var tokens = pack_tokens(tape, tape.constant(clip.values), bound, spec, &seq.blocks);
  seq.tokens = tape.value(tokens);
  seq.total_tokens = seq.tokens.dim(0);
  return seq;
}

nlohmann::json manifest(const VideoTokenSequence& sequence) {
  nlohmann::json j;
  j["version"] = 1;
  j["strategy"] = compress::to_string(sequence.strategy);
  j["frames"] = sequence.frames;
  j["total_tokens"] = sequence.total_tokens;
  j["tokens_per_frame"] = sequence.tokens_per_frame_floor();
  nlohmann::json blocks = nlohmann::json::array();
  for (const TokenBlock& b : sequence.blocks) {
    blocks.push_back({{"segment", b.segment},
                      {"kind", to_string(b.kind)},
                      {"offset", b.offset},
                      {"count", b.count}});
  }
  j["blocks"] = std::move(blocks);
  return j;
}

}  // namespace clapper::video
