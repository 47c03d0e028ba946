#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "clapper/array.hpp"

namespace clapper {

using ParamMap = std::map<std::string, Array>;

struct OptimState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  ParamMap first_moment;
  ParamMap second_moment;
};

// One Adam update over every entry of `grads`; parameters without a gradient
// entry are left alone. Moments are created lazily, shape-matched to params.
ParamMap adam_step(const ParamMap& params, const ParamMap& grads, OptimState& state);

// Plain gradient descent, p -= lr * g.
ParamMap sgd_step(const ParamMap& params, const ParamMap& grads, double learning_rate);

}  // namespace clapper
