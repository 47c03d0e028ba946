#include "clapper/optim.hpp"

#include <cmath>
#include <vector>

#include "clapper/errors.hpp"

namespace clapper {
namespace {

const Array& param_for(const ParamMap& params, const std::string& name, const Array& grad) {
  const auto it = params.find(name);
  if (it == params.end()) {
    throw InputError("gradient for unknown parameter '" + name + "'");
  }
  if (it->second.shape() != grad.shape()) {
    throw DimensionError("parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                         " but its gradient has " + shape_string(grad.shape()));
  }
  return it->second;
}

}  // namespace

ParamMap adam_step(const ParamMap& params, const ParamMap& grads, OptimState& state) {
  for (const auto& [name, grad] : grads) {
    param_for(params, name, grad);
  }
  ParamMap updated = params;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, grad] : grads) {
    const Array& p = params.at(name);
    auto m_it = state.first_moment.try_emplace(name, Array::zeros(p.shape())).first;
    auto v_it = state.second_moment.try_emplace(name, Array::zeros(p.shape())).first;
    std::vector<double> m(m_it->second.values().begin(), m_it->second.values().end());
    std::vector<double> v(v_it->second.values().begin(), v_it->second.values().end());
    std::vector<double> out(p.values().begin(), p.values().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      out[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    m_it->second = Array(p.shape(), std::move(m));
    v_it->second = Array(p.shape(), std::move(v));
    updated.at(name) = Array(p.shape(), std::move(out));
  }
  return updated;
}

ParamMap sgd_step(const ParamMap& params, const ParamMap& grads, double learning_rate) {
  ParamMap updated = params;
  for (const auto& [name, grad] : grads) {
    const Array& p = param_for(params, name, grad);
    std::vector<double> out(p.values().begin(), p.values().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] -= learning_rate * grad[i];
    }
    updated.at(name) = Array(p.shape(), std::move(out));
  }
  return updated;
}

}  // namespace clapper
