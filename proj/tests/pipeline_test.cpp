#include <gtest/gtest.h>

#include <cmath>

#include "clapper/errors.hpp"
#include "clapper/pipeline.hpp"
#include "test_support.hpp"

namespace clapper::video {
namespace {

using compress::CompressorSpec;
using compress::ModelDims;
using compress::Strategy;

TEST(PlanSamplingTest, BelowCapUsesOneSecondSpacing) {
  const SamplingPlan plan = plan_sampling(10.0);
  ASSERT_EQ(plan.timestamps.size(), 10u);
  EXPECT_FALSE(plan.capped);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_DOUBLE_EQ(plan.timestamps[i], static_cast<double>(i));
  }
}

TEST(PlanSamplingTest, AtCapTakesEveryFrame) {
  EXPECT_EQ(plan_sampling(96.0).timestamps.size(), 96u);
  EXPECT_FALSE(plan_sampling(96.0).capped);
}

TEST(PlanSamplingTest, LongVideoEquallySpacedOverFullDuration) {
  const SamplingPlan plan = plan_sampling(192.0);
  ASSERT_EQ(plan.timestamps.size(), 96u);
  EXPECT_TRUE(plan.capped);
  EXPECT_DOUBLE_EQ(plan.timestamps.front(), 1.0);
  EXPECT_DOUBLE_EQ(plan.timestamps.back(), 191.0);
  for (std::size_t i = 1; i < plan.timestamps.size(); ++i) {
    EXPECT_NEAR(plan.timestamps[i] - plan.timestamps[i - 1], 2.0, 1e-9);
  }
}

TEST(PlanSamplingTest, CappedGapsDeviateLessThanOneSourcePeriod) {
  for (double duration : {97.0, 150.5, 600.0, 3601.25}) {
    const SamplingPlan plan = plan_sampling(duration);
    ASSERT_EQ(plan.timestamps.size(), 96u);
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 1; i < plan.timestamps.size(); ++i) {
      const double gap = plan.timestamps[i] - plan.timestamps[i - 1];
      lo = std::min(lo, gap);
      hi = std::max(hi, gap);
    }
    EXPECT_LT(hi - lo, 1.0);
    EXPECT_GE(plan.timestamps.front(), 0.0);
    EXPECT_LE(plan.timestamps.back(), duration);
  }
}

TEST(PlanSamplingTest, ShortVideoStillGetsAFrame) {
  EXPECT_EQ(plan_sampling(0.4).timestamps.size(), 1u);
}

TEST(PlanSamplingTest, RejectsInvalidArguments) {
  EXPECT_THROW(plan_sampling(0.0), InputError);
  EXPECT_THROW(plan_sampling(-3.0), InputError);
  EXPECT_THROW(plan_sampling(10.0, 0.0), InputError);
  EXPECT_THROW(plan_sampling(10.0, 1.0, 0), InputError);
}

TEST(SegmentizeTest, NinetySixFramesGiveTwentyFourFullSegments) {
  const auto segments = segmentize(96);
  ASSERT_EQ(segments.size(), 24u);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    EXPECT_EQ(segments[i].size, 4u);
    EXPECT_EQ(segments[i].keyframe(), 4 * i);
  }
}

TEST(SegmentizeTest, RemainderRule) {
  EXPECT_EQ(segmentize(1).size(), 1u);
  EXPECT_EQ(segmentize(1)[0].size, 1u);
  const auto five = segmentize(5);
  ASSERT_EQ(five.size(), 2u);
  EXPECT_EQ(five[0].size, 4u);
  EXPECT_EQ(five[1].size, 1u);
  EXPECT_EQ(five[1].keyframe(), 4u);
  for (std::size_t t = 1; t <= 200; ++t) {
    const auto s = segmentize(t);
    EXPECT_EQ(s.size(), (t + 3) / 4);
    EXPECT_EQ(s.back().size, (t - 1) % 4 + 1);
  }
  EXPECT_THROW(segmentize(0), InputError);
}

TEST(TokenCountTest, QuotedFigures) {
  EXPECT_EQ(token_count(1), 196u);
  EXPECT_EQ(token_count(4), 245u);
  EXPECT_EQ(token_count(2), 245u);
  EXPECT_EQ(token_count(3), 245u);
  EXPECT_EQ(token_count(5), 441u);
  EXPECT_EQ(token_count(96), 5880u);
  // ten minutes at 1 fps without compression
  EXPECT_EQ(600u * 196u, 117600u);
}

TEST(TokenCountTest, FloorTokensPerFrameIs61ForWholeSegments) {
  for (std::size_t t = 4; t <= 400; t += 4) {
    EXPECT_EQ(token_count(t) * 4, 245 * t);
    EXPECT_EQ(token_count(t) / t, 61u);
  }
}

TEST(TokenCountTest, MonotoneInFrames) {
  for (std::size_t t = 1; t < 1000; ++t) {
    EXPECT_LE(token_count(t), token_count(t + 1));
  }
}

TEST(StrategyTokenCountTest, FullGrid) {
  EXPECT_EQ(strategy_token_count(Strategy::kBaseline4x, 4, 28), 784u);
  EXPECT_EQ(strategy_token_count(Strategy::kTemporalPool, 4, 28), 196u);
  EXPECT_EQ(strategy_token_count(Strategy::kSpatialPool, 4, 28), 196u);
  EXPECT_EQ(strategy_token_count(Strategy::kPerceiver, 4, 28), 245u);
  EXPECT_EQ(strategy_token_count(Strategy::kTimePerceiver, 4, 28), 245u);
}

class PackVideoTest : public ::testing::TestWithParam<Strategy> {};

TEST_P(PackVideoTest, TotalsMatchFormulaForOneToSixtyFourFrames) {
  const Strategy strategy = GetParam();
  CompressorSpec spec;
  spec.strategy = strategy;
  const compress::ModelParams params = compress::init_params(spec, ModelDims{8, 4, 4}, 1);
  const synth::FrameFeatureClip full = synth::mock_encode(64, 8, 4, 3);
  for (std::size_t t = 1; t <= 64; ++t) {
    synth::FrameFeatureClip clip = full;
    clip.frames = t;
    const auto v = full.values.values();
    clip.values = Array({t, 8, 8, 4}, std::vector<double>(v.begin(), v.begin() + t * 256));
    const VideoTokenSequence seq = pack_video(clip, spec, params);
    EXPECT_EQ(seq.total_tokens, strategy_token_count(strategy, t, 8)) << t;
    EXPECT_EQ(seq.tokens.shape(), (Shape{seq.total_tokens, 4}));
    if (compress::is_learned(strategy)) {
      EXPECT_EQ(seq.total_tokens, token_count(t, 16, 4));
    }
    // blocks tile the sequence in temporal order
    std::size_t offset = 0, segment = 0;
    for (const TokenBlock& b : seq.blocks) {
      EXPECT_EQ(b.offset, offset);
      EXPECT_GE(b.segment, segment);
      segment = b.segment;
      offset += b.count;
    }
    EXPECT_EQ(offset, seq.total_tokens);
  }
}

INSTANTIATE_TEST_SUITE_P(AllStrategies, PackVideoTest,
                         ::testing::ValuesIn(compress::all_strategies().begin(),
                                             compress::all_strategies().end()),
                         [](const auto& info) {
                           std::string name = compress::to_string(info.param);
                           std::erase(name, '-');
                           return name;
                         });

TEST(PackVideoTest, FullGridFullSegment) {
  CompressorSpec spec;
  spec.heads = 8;
  const compress::ModelParams params = compress::init_params(spec, ModelDims{28, 16, 4}, 0);
  const VideoTokenSequence seq = pack_video(synth::mock_encode(4, 28, 16, 1), spec, params);
  ASSERT_EQ(seq.blocks.size(), 2u);
  EXPECT_EQ(seq.blocks[0].kind, BlockKind::kKeyframe);
  EXPECT_EQ(seq.blocks[0].count, 196u);
  EXPECT_EQ(seq.blocks[1].kind, BlockKind::kTemporal);
  EXPECT_EQ(seq.blocks[1].count, 49u);
  EXPECT_EQ(seq.total_tokens, 245u);
}

TEST(PackVideoTest, FullGridSingleFrameHasNoTemporalBlock) {
  CompressorSpec spec;
  spec.heads = 8;
  const compress::ModelParams params = compress::init_params(spec, ModelDims{28, 16, 4}, 0);
  const VideoTokenSequence seq = pack_video(synth::mock_encode(1, 28, 16, 1), spec, params);
  ASSERT_EQ(seq.blocks.size(), 1u);
  EXPECT_EQ(seq.total_tokens, 196u);
}

TEST(PackVideoTest, DeskScaleEightFrames) {
  const CompressorSpec spec;
  const compress::ModelParams params = compress::init_params(spec, ModelDims{8, 16, 4}, 0);
  const VideoTokenSequence seq = pack_video(synth::mock_encode(8, 8, 16, 2), spec, params);
  EXPECT_EQ(seq.total_tokens, 40u);
  EXPECT_EQ(seq.tokens_per_frame_floor(), 5u);
}

TEST(PackVideoTest, KeyframeBlockIsStride2PoolOfFirstFrame) {
  const CompressorSpec spec;
  const compress::ModelParams params = compress::init_params(spec, ModelDims{8, 4, 4}, 0);
  const synth::FrameFeatureClip clip = synth::mock_encode(6, 8, 4, 5);
  const VideoTokenSequence seq = pack_video(clip, spec, params);
  const Array expected = compress::keyframe_compress(clip.frame(4));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(seq.tokens[seq.blocks[2].offset * 4 + i], expected[i]);
  }
}

TEST(PackVideoTest, MismatchedParamsAreConfigErrors) {
  CompressorSpec spec;
  const compress::ModelParams params = compress::init_params(spec, ModelDims{8, 16, 4}, 0);
  EXPECT_THROW(pack_video(synth::mock_encode(4, 8, 8, 0), spec, params), ConfigError);
  CompressorSpec other = spec;
  other.strategy = Strategy::kPerceiver;
  EXPECT_THROW(pack_video(synth::mock_encode(4, 8, 16, 0), other, params), ConfigError);
}

TEST(ManifestTest, ListsBlocksInOrder) {
  const CompressorSpec spec;
  const compress::ModelParams params = compress::init_params(spec, ModelDims{8, 4, 4}, 0);
  const nlohmann::json j = manifest(pack_video(synth::mock_encode(5, 8, 4, 0), spec, params));
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["total_tokens"], 36);
  ASSERT_EQ(j["blocks"].size(), 3u);
  EXPECT_EQ(j["blocks"][2]["kind"], "keyframe");
  EXPECT_EQ(j["blocks"][2]["offset"], 20);
}

}  // namespace
}  // namespace clapper::video
