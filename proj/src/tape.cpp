#include "clapper/tape.hpp"

#include <algorithm>

#include "clapper/errors.hpp"

namespace clapper {

GradientBuffers::GradientBuffers(std::vector<std::size_t> sizes)
    : sizes_(std::move(sizes)), buffers_(sizes_.size()) {}

std::span<double> GradientBuffers::operator[](Var v) {
  auto& buf = buffers_.at(v.index);
  if (buf.empty()) {
    buf.assign(sizes_[v.index], 0.0);
  }
  return buf;
}

Gradients::Gradients(std::vector<Shape> shapes, std::vector<std::vector<double>> buffers)
    : shapes_(std::move(shapes)), buffers_(std::move(buffers)) {}

Array Gradients::of(Var v) const {
  const auto& buf = buffers_.at(v.index);
  if (buf.empty()) {
    return Array::zeros(shapes_[v.index]);
  }
  return Array(shapes_[v.index], buf);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Array value) { return push(Node{std::move(value), false, {}}); }

Var Tape::parameter(Array value) { return push(Node{std::move(value), true, {}}); }

Var Tape::record(Array value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) {
    if (in.index >= nodes_.size()) {
      throw InputError("op input does not belong to this tape");
    }
    needs = needs || nodes_[in.index].requires_grad;
  }
  needs = needs && grad_enabled_;
  return push(Node{std::move(value), needs, needs ? std::move(backward) : Backward{}});
}

Gradients Tape::backward(Var loss, const std::function<void(std::size_t)>& on_visit) const {
  if (loss.index >= nodes_.size()) {
    throw InputError("loss does not belong to this tape");
  }
  if (value(loss).size() != 1) {
    throw DimensionError("backward needs a scalar loss, got shape " + shape_string(shape(loss)));
  }
  std::vector<std::size_t> sizes(nodes_.size());
  std::vector<Shape> shapes(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    sizes[i] = nodes_[i].value.size();
    shapes[i] = nodes_[i].value.shape();
  }
  GradientBuffers grads(std::move(sizes));
  if (nodes_[loss.index].requires_grad) {
    grads[loss][0] = 1.0;
  }
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!grads.touched(Var{i})) {
      continue;
    }
    if (node.backward) {
      if (on_visit) {
        on_visit(i);
      }
      node.backward(*this, Var{i}, grads[Var{i}], grads);
    }
  }
  return Gradients(std::move(shapes), std::move(grads).release());
}

}  // namespace clapper
