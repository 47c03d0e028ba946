#include "clapper/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "clapper/errors.hpp"
#include "clapper/ops.hpp"
#include "clapper/random.hpp"
#include "clapper/training.hpp"

namespace clapper::check {
namespace {

constexpr double kErrorFloor = 1e-6;
constexpr char kClipName[] = "input.clip";

double evaluate(const ParamMap& inputs, const LossBuilder& build) {
  Tape tape;
  tape.set_grad_enabled(false);
  std::map<std::string, Var> vars;
  for (const auto& [name, value] : inputs) {
    vars[name] = tape.constant(value);
  }
  return tape.value(build(tape, vars)).item();
}

Array perturbed(const Array& a, std::size_t index, double delta) {
  std::vector<double> v(a.values().begin(), a.values().end());
  v[index] += delta;
  return Array(a.shape(), std::move(v));
}

}  // namespace

bool GradCheckReport::passed() const {
  if (!loss_finite || !diagnostic.empty() || params.empty()) {
    return false;
  }
  return std::all_of(params.begin(), params.end(), [](const ParamCheck& p) { return p.passed; });
}

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const ParamCheck& p : params) {
    worst = std::max(worst, p.max_relative_error);
  }
  return worst;
}

nlohmann::json to_json(const GradCheckReport& report) {
  nlohmann::json params = nlohmann::json::array();
  for (const ParamCheck& p : report.params) {
    params.push_back({{"name", p.name},
                      {"elements", p.elements},
                      {"max_relative_error", p.max_relative_error},
                      {"max_absolute_error", p.max_absolute_error},
                      {"gradient_finite", p.gradient_finite},
                      {"passed", p.passed}});
  }
  return {{"version", 1},
          {"subject", report.subject},
          {"tolerance", report.tolerance},
          {"step", report.step},
          {"loss_finite", report.loss_finite},
          {"diagnostic", report.diagnostic},
          {"passed", report.passed()},
          {"max_relative_error", report.max_relative_error()},
          {"params", std::move(params)}};
}

GradCheckReport grad_check(const ParamMap& inputs, const LossBuilder& build, double tolerance,
                           double h) {
  GradCheckReport report;
  report.tolerance = tolerance;
  report.step = h;

  Tape tape;
  std::map<std::string, Var> vars;
  for (const auto& [name, value] : inputs) {
    vars[name] = tape.parameter(value);
  }
  std::map<std::string, Array> analytic;
  try {
    const Var loss = build(tape, vars);
    const Gradients grads = tape.backward(loss);
    for (const auto& [name, var] : vars) {
      analytic.emplace(name, grads.of(var));
    }
  } catch (const NonFiniteError& e) {
    report.loss_finite = false;
    report.diagnostic = std::string("non-finite value in forward or backward pass: ") + e.what();
    return report;
  }

  for (const auto& [name, value] : inputs) {
    ParamCheck check;
    check.name = name;
    check.elements = value.size();
    const Array& a = analytic.at(name);
    ParamMap probe = inputs;
    for (std::size_t i = 0; i < value.size(); ++i) {
      double plus = 0.0, minus = 0.0;
      try {
        probe[name] = perturbed(value, i, h);
        plus = evaluate(probe, build);
        probe[name] = perturbed(value, i, -h);
        minus = evaluate(probe, build);
      } catch (const NonFiniteError& e) {
        report.loss_finite = false;
        report.diagnostic = "non-finite loss while perturbing " + name;
        break;
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double abs_error = std::abs(a[i] - numeric);
      const double denom = std::max({std::abs(a[i]), std::abs(numeric), kErrorFloor});
      check.max_absolute_error = std::max(check.max_absolute_error, abs_error);
      check.max_relative_error = std::max(check.max_relative_error, abs_error / denom);
    }
    probe[name] = value;
    check.passed = report.loss_finite && check.max_relative_error < tolerance;
    report.params.push_back(std::move(check));
  }
  return report;
}

GradCheckReport grad_check_model(const compress::CompressorSpec& spec,
                                 const compress::ModelDims& dims, double tolerance,
                                 std::uint64_t seed, const Array* clip) {
  compress::ModelParams model = compress::init_params(spec, dims, seed);
  train::ensure_head(model, synth::TaskKind::kChangeDirection, seed);

  // Probe away from the initial point so zero biases and unit gains do not
  // mask errors in their gradient paths.
  Rng rng(derive_seed(seed, 60, 0));
  ParamMap inputs;
  for (const auto& [name, value] : model.arrays) {
    std::vector<double> v(value.values().begin(), value.values().end());
    for (double& x : v) {
      x += rng.uniform(-0.1, 0.1);
    }
    inputs.emplace(name, Array(value.shape(), std::move(v)));
  }
  if (clip != nullptr) {
    inputs.emplace(kClipName, *clip);
  } else {
    std::vector<double> v(dims.max_frames * dims.grid * dims.grid * dims.channels);
    for (double& x : v) {
      x = rng.uniform(-1.0, 1.0);
    }
    inputs.emplace(kClipName, Array({dims.max_frames, dims.grid, dims.grid, dims.channels}, v));
  }

  const LossBuilder build = [&model](Tape& tape, const std::map<std::string, Var>& vars) {
    std::map<std::string, Var> params(vars);
    const Var clip_var = params.at(kClipName);
    params.erase(kClipName);
    const compress::BoundParams bound(std::move(params));
    const Var logits = train::head_output(tape, bound, model, clip_var,
                                          synth::TaskKind::kChangeDirection);
    return ad::cross_entropy(tape, logits, 1);
  };
  GradCheckReport report = grad_check(inputs, build, tolerance);
  report.subject = compress::to_string(spec.strategy);
  return report;
}

}  // namespace clapper::check
