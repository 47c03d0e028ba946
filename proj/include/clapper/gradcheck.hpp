#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "clapper/compressors.hpp"
#include "clapper/optim.hpp"
#include "clapper/tape.hpp"

namespace clapper::check {

struct ParamCheck {
  std::string name;
  std::size_t elements = 0;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  bool gradient_finite = true;
  bool passed = false;
};

struct GradCheckReport {
  std::string subject;
  double tolerance = 0.0;
  double step = 0.0;
  bool loss_finite = true;
  std::string diagnostic;  // set when the check could not run
  std::vector<ParamCheck> params;

  bool passed() const;
  double max_relative_error() const;
};

nlohmann::json to_json(const GradCheckReport& report);

// Builds a scalar loss from the named inputs, each already on `tape`.
using LossBuilder = std::function<Var(Tape& tape, const std::map<std::string, Var>& vars)>;

// Central differences of step `h` against the tape gradient for every element
// of every input. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const ParamMap& inputs, const LossBuilder& build, double tolerance,
                           double h = 1e-5);

// Whole-model check: a random clip (or `clip` when given) through the
// strategy's packing, the shared readout and a classification head, into a
// cross-entropy loss. The clip itself is checked as "input.clip".
GradCheckReport grad_check_model(const compress::CompressorSpec& spec,
                                 const compress::ModelDims& dims, double tolerance,
                                 std::uint64_t seed = 0, const Array* clip = nullptr);

}  // namespace clapper::check
