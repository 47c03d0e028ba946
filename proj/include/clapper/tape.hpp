#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "clapper/array.hpp"

namespace clapper {

// Handle to a value recorded on a Tape. Only meaningful for the tape that
// produced it.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t index = kInvalid;

  bool valid() const noexcept { return index != kInvalid; }
};

// Per-node gradient accumulators, allocated on first touch.
class GradientBuffers {
 public:
  GradientBuffers(std::vector<std::size_t> sizes);

  // Accumulator for `v`; zero-filled on first access.
  std::span<double> operator[](Var v);
  bool touched(Var v) const { return !buffers_[v.index].empty(); }
  std::vector<std::vector<double>> release() && { return std::move(buffers_); }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::vector<double>> buffers_;
};

class Gradients {
 public:
  Gradients(std::vector<Shape> shapes, std::vector<std::vector<double>> buffers);

  // Gradient of the loss w.r.t. `v`; zeros when the loss does not depend on it.
  Array of(Var v) const;
  bool reached(Var v) const { return !buffers_.at(v.index).empty(); }

 private:
  std::vector<Shape> shapes_;
  std::vector<std::vector<double>> buffers_;
};

// Define-by-run record of primitive ops. A fresh tape is built for every
// forward pass; backward() replays it once in strict reverse order.
class Tape {
 public:
  // Receives d(loss)/d(self) and adds each input's contribution into `grads`.
  // Closures look values up through the tape, so a tape stays movable.
  using Backward = std::function<void(const Tape& tape, Var self, std::span<const double> out_grad,
                                      GradientBuffers& grads)>;

  Var constant(Array value);
  Var parameter(Array value);

  // Appends an op result. `backward` is dropped when no input needs a gradient
  // or gradient recording is disabled.
  Var record(Array value, std::span<const Var> inputs, Backward backward);

  const Array& value(Var v) const { return nodes_.at(v.index).value; }
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Inference mode: ops still produce values but record no backward closures.
  void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

  // `on_visit` (optional) sees each node index whose backward rule runs.
  Gradients backward(Var loss, const std::function<void(std::size_t)>& on_visit = {}) const;

 private:
  struct Node {
    Array value;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace clapper
