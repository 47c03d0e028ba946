#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <chrono>

#include "clapper/compressors.hpp"
#include "clapper/errors.hpp"
#include "clapper/ops.hpp"
#include "clapper/synth.hpp"
#include "test_support.hpp"

namespace clapper::compress {
namespace {

using testing::random_array;

// Reorders the frames of a [T x G x G x D] array.
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

ModelParams desk_params(Strategy strategy, bool position, std::uint64_t seed,
                        std::size_t grid = 8, std::size_t channels = 16) {
  CompressorSpec spec;
  spec.strategy = strategy;
  spec.temporal_position = position;
  return init_params(spec, ModelDims{grid, channels, 4}, seed);
}

ModelParams with_array(ModelParams p, const std::string& name, Array value) {
  p.arrays[name] = std::move(value);
  return p;
}

TEST(StrategyTest, NamesRoundTrip) {
  for (Strategy s : all_strategies()) {
    EXPECT_EQ(strategy_from_string(to_string(s)), s);
  }
  try {
    strategy_from_string("maxpool");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("timeperceiver"), std::string::npos);
  }
}

TEST(KeyframeCompressTest, FullGridGives196Tokens) {
  EXPECT_EQ(keyframe_compress(Array::zeros({28, 28, 3})).shape(), (Shape{196, 3}));
}

TEST(KeyframeCompressTest, ConstantFrameGivesConstantTokens) {
  const Array out = keyframe_compress(Array::filled({8, 8, 2}, 0.75));
  EXPECT_EQ(out, Array::filled({16, 2}, 0.75));
}

TEST(KeyframeCompressTest, HandFilledGrid) {
  // 4x4x1 grid holding 0..15 row-major
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) {
    v[i] = i;
  }
  const Array out = keyframe_compress(Array({4, 4, 1}, v));
  // windows {0,1,4,5}, {2,3,6,7}, {8,9,12,13}, {10,11,14,15}
  EXPECT_EQ(out, Array({4, 1}, {2.5, 4.5, 10.5, 12.5}));
}

TEST(SpatialPoolCompressTest, FullGridGives49Tokens) {
  EXPECT_EQ(spatial_pool_compress(Array::zeros({28, 28, 2})).shape(), (Shape{49, 2}));
  EXPECT_EQ(spatial_pool_compress(Array::filled({8, 8, 2}, -1.5)), Array::filled({4, 2}, -1.5));
}

TEST(SpatialPoolCompressTest, EqualsTwoStride2Pools) {
  const Array x = random_array({8, 8, 3}, 4);
  const Array twice = avg_pool_grid(avg_pool_grid(x, 2), 2);
  EXPECT_LT(max_abs_diff(spatial_pool_compress(x), twice.reshaped({4, 3})), 1e-12);
  EXPECT_THROW(spatial_pool_compress(Array::zeros({6, 6, 1})), ConfigError);
}

TEST(TemporalPoolCompressTest, FullGridGives196PerSegment) {
  EXPECT_EQ(temporal_pool_compress(Array::zeros({4, 28, 28, 1})).shape(), (Shape{196, 1}));
}

TEST(TemporalPoolCompressTest, IdenticalFramesEqualBaseline) {
  const Array frame = random_array({8, 8, 2}, 8);
  std::vector<double> v;
  for (int t = 0; t < 4; ++t) {
    v.insert(v.end(), frame.values().begin(), frame.values().end());
  }
  EXPECT_LT(max_abs_diff(temporal_pool_compress(Array({4, 8, 8, 2}, v)),
                         keyframe_compress(frame)),
            1e-15);
}

TEST(TemporalPoolCompressTest, ChangeDirectionPairIsIndistinguishable) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const synth::SyntheticSample s = synth::gen_change_direction(8, 16, seed);
    const synth::FrameFeatureClip mirror = synth::reverse_time(s.clip);
    EXPECT_EQ(temporal_pool_compress(s.clip.values), temporal_pool_compress(mirror.values));
  }
}

TEST(InitParamsTest, PerceiverQueriesExistOnlyForPerceiver) {
  EXPECT_TRUE(desk_params(Strategy::kPerceiver, true, 0).contains("compressor.queries"));
  EXPECT_FALSE(desk_params(Strategy::kTimePerceiver, true, 0).contains("compressor.queries"));
  EXPECT_EQ(desk_params(Strategy::kPerceiver, true, 0).at("compressor.queries").shape(),
            (Shape{4, 16}));
  EXPECT_TRUE(desk_params(Strategy::kSpatialPool, true, 0).arrays.empty());
}

TEST(InitParamsTest, PositionTableFollowsFlag) {
  EXPECT_TRUE(desk_params(Strategy::kTimePerceiver, true, 0).contains("compressor.temporal_pos"));
  EXPECT_FALSE(desk_params(Strategy::kTimePerceiver, false, 0).contains("compressor.temporal_pos"));
}

TEST(InitParamsTest, HeadsMustDivideChannels) {
  CompressorSpec spec;
  spec.heads = 3;
  EXPECT_THROW(init_params(spec, ModelDims{8, 16, 4}, 0), ConfigError);
}

TEST(InitParamsTest, SeededAndDeskScale) {
  const ModelParams a = desk_params(Strategy::kTimePerceiver, true, 5);
  const ModelParams b = desk_params(Strategy::kTimePerceiver, true, 5);
  const ModelParams c = desk_params(Strategy::kTimePerceiver, true, 6);
  EXPECT_EQ(a.arrays, b.arrays);
  EXPECT_NE(a.arrays, c.arrays);
  EXPECT_LT(a.parameter_count(), 100000u);
}

TEST(InitParamsTest, ParamGroups) {
  EXPECT_EQ(param_group("compressor.layer0.wq"), "compressor");
  EXPECT_EQ(param_group("head.direction.weight"), "head.direction");
}

TEST(TimePerceiverTest, FullDimensionsShape) {
  CompressorSpec spec;
  spec.heads = 8;
  const ModelParams p = init_params(spec, ModelDims{28, 1152, 4}, 1);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t t : {2u, 3u, 4u}) {
    const Array clip = synth::mock_encode(t, 28, 1152, 7).values;
    EXPECT_EQ(timeperceiver_forward(clip, p).shape(), (Shape{49, 1152})) << t << " frames";
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 30.0);
}

TEST(TimePerceiverTest, OutputCountEqualsQueriesForEveryLength) {
  const ModelParams tp = desk_params(Strategy::kTimePerceiver, true, 2);
  const ModelParams pc = desk_params(Strategy::kPerceiver, true, 2);
  for (std::size_t t : {2u, 3u, 4u}) {
    const Array clip = random_array({t, 8, 8, 16}, t);
    EXPECT_EQ(timeperceiver_forward(clip, tp).shape(), (Shape{4, 16}));
    EXPECT_EQ(perceiver_forward(clip, pc).shape(), (Shape{4, 16}));
  }
}

TEST(TimePerceiverTest, RejectsFrameCountsOutsideTwoToFour) {
  const ModelParams p = desk_params(Strategy::kTimePerceiver, true, 2);
  EXPECT_THROW(timeperceiver_forward(random_array({1, 8, 8, 16}, 0), p), InputError);
  EXPECT_THROW(timeperceiver_forward(random_array({5, 8, 8, 16}, 0), p), InputError);
  EXPECT_THROW(timeperceiver_forward(random_array({2, 8, 8, 8}, 0), p), ConfigError);
}

TEST(TimePerceiverTest, ZeroProjectionsReturnPooledQueries) {
  ModelParams p = desk_params(Strategy::kTimePerceiver, true, 3);
  for (auto& [name, value] : p.arrays) {
    if (name.ends_with("wq") || name.ends_with("wk") || name.ends_with("wv") ||
        name.ends_with("wo") || name.find("ff_") != std::string::npos) {
      value = Array::zeros(value.shape());
    }
  }
  const Array frame = random_array({8, 8, 16}, 12);
  std::vector<double> v;
  for (int t = 0; t < 4; ++t) {
    v.insert(v.end(), frame.values().begin(), frame.values().end());
  }
  const Array out = timeperceiver_forward(Array({4, 8, 8, 16}, v), p);
  EXPECT_LT(max_abs_diff(out, spatial_pool_compress(frame)), 1e-15);
}

TEST(TimePerceiverTest, PermutationInvariantWithoutPositions) {
  const ModelParams p = desk_params(Strategy::kTimePerceiver, false, 4);
  const Array clip = random_array({4, 8, 8, 16}, 13);
  const Array reference = timeperceiver_forward(clip, p);
  std::vector<std::size_t> order = {0, 1, 2, 3};
  do {
    EXPECT_LT(max_abs_diff(timeperceiver_forward(permute_frames(clip, order), p), reference),
              1e-9);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(TimePerceiverTest, OrderSensitiveWithPositions) {
  const ModelParams p = desk_params(Strategy::kTimePerceiver, true, 4);
  const Array clip = random_array({4, 8, 8, 16}, 13);
  const Array reversed = permute_frames(clip, {3, 2, 1, 0});
  EXPECT_GT(max_abs_diff(timeperceiver_forward(clip, p), timeperceiver_forward(reversed, p)),
            1e-6);
}

TEST(PerceiverTest, EquivalentToTimePerceiverUnderQuerySubstitution) {
  const ModelParams tp = desk_params(Strategy::kTimePerceiver, true, 9);
  for (std::size_t t : {2u, 3u, 4u}) {
    const Array clip = random_array({t, 8, 8, 16}, 20 + t);
    const Array pooled = mean_over_time(avg_pool_grid(clip, 4)).reshaped({4, 16});
    ModelParams pc = with_array(tp, "compressor.queries", pooled);
    pc.spec.strategy = Strategy::kPerceiver;
    EXPECT_EQ(perceiver_forward(clip, pc), timeperceiver_forward(clip, tp));
  }
}

TEST(AttentionTest, RowsSumToOneForEveryHead) {
  for (Strategy s : {Strategy::kTimePerceiver, Strategy::kPerceiver}) {
    const ModelParams p = desk_params(s, true, 7);
    Tape tape;
    const BoundParams bound = bind(tape, p);
    const Var clip = tape.constant(random_array({3, 8, 8, 16}, 31, -3.0, 3.0));
    std::vector<Var> attention;
    if (s == Strategy::kTimePerceiver) {
      timeperceiver_forward(tape, clip, bound, p.spec, &attention);
    } else {
      perceiver_forward(tape, clip, bound, p.spec, &attention);
    }
    ASSERT_EQ(attention.size(), p.spec.heads);
    for (Var w : attention) {
      const Array& a = tape.value(w);
      // keys cover the 4 latents plus 3 frames of 64 cells
      ASSERT_EQ(a.shape(), (Shape{4, 4 + 3 * 64}));
      for (std::size_t r = 0; r < a.dim(0); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < a.dim(1); ++c) {
          EXPECT_GE(a[r * a.dim(1) + c], 0.0);
          sum += a[r * a.dim(1) + c];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
    }
  }
}

TEST(BindTest, FrozenNamesBecomeConstants) {
  const ModelParams p = desk_params(Strategy::kTimePerceiver, true, 1);
  Tape tape;
  const BoundParams bound =
      bind(tape, p, [](const std::string& name) { return name.rfind("head.", 0) == 0; });
  for (const auto& [name, var] : bound.vars()) {
    EXPECT_FALSE(tape.requires_grad(var)) << name;
  }
  EXPECT_EQ(bound.vars().size(), p.arrays.size());
}

}  // namespace
}  // namespace clapper::compress
