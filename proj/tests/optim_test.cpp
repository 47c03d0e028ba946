#include <gtest/gtest.h>

#include <cmath>

#include "clapper/errors.hpp"
#include "clapper/optim.hpp"
#include "test_support.hpp"

namespace clapper {
namespace {

TEST(AdamTest, ZeroGradientLeavesFreshParametersUnchanged) {
  const ParamMap params = {{"w", testing::random_array({3, 2}, 1)}};
  OptimState state;
  const ParamMap out = adam_step(params, {{"w", Array::zeros({3, 2})}}, state);
  EXPECT_EQ(out, params);
  EXPECT_EQ(state.step, 1);
  EXPECT_EQ(state.first_moment.at("w"), Array::zeros({3, 2}));
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  // m_hat = g and v_hat = g^2 after bias correction, so the step is
  // lr * g / (|g| + eps) = 0.1 / (1 + 1e-8).
  OptimState state;
  state.learning_rate = 0.1;
  const ParamMap out = adam_step({{"p", Array::scalar(1.0)}}, {{"p", Array::scalar(1.0)}}, state);
  EXPECT_NEAR(out.at("p").item(), 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(out.at("p").item(), 0.9, 1e-8);
}

TEST(AdamTest, StepCounterAdvancesByOne) {
  ParamMap params = {{"p", Array::scalar(0.5)}};
  OptimState state;
  for (int i = 1; i <= 5; ++i) {
    params = adam_step(params, {{"p", Array::scalar(0.25)}}, state);
    EXPECT_EQ(state.step, i);
    EXPECT_EQ(state.second_moment.at("p").shape(), params.at("p").shape());
  }
}

TEST(AdamTest, IdenticalStateGivesIdenticalBits) {
  const ParamMap params = {{"a", testing::random_array({4}, 2)}, {"b", testing::random_array({2, 2}, 3)}};
  const ParamMap grads = {{"a", testing::random_array({4}, 4)}, {"b", testing::random_array({2, 2}, 5)}};
  OptimState s1, s2;
  ParamMap p1 = adam_step(params, grads, s1);
  ParamMap p2 = adam_step(params, grads, s2);
  p1 = adam_step(p1, grads, s1);
  p2 = adam_step(p2, grads, s2);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(s1.first_moment, s2.first_moment);
  EXPECT_EQ(s1.second_moment, s2.second_moment);
}

TEST(AdamTest, ShapeMismatchRejected) {
  OptimState state;
  EXPECT_THROW(adam_step({{"p", Array::zeros({2})}}, {{"p", Array::zeros({3})}}, state),
               DimensionError);
  EXPECT_THROW(adam_step({{"p", Array::zeros({2})}}, {{"q", Array::zeros({2})}}, state),
               InputError);
}

TEST(SgdTest, PlainDescentStep) {
  const ParamMap out = sgd_step({{"p", Array({2}, {1.0, -1.0})}}, {{"p", Array({2}, {0.5, 2.0})}}, 0.1);
  EXPECT_DOUBLE_EQ(out.at("p")[0], 0.95);
  EXPECT_DOUBLE_EQ(out.at("p")[1], -1.2);
}

}  // namespace
}  // namespace clapper
