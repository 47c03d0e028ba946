#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "clapper/array.hpp"
#include "clapper/tape.hpp"

namespace clapper {

// Plain array kernels. Each one has a differentiable twin in clapper::ad.

// [M x K] x [K x N] -> [M x N].
Array matmul(const Array& a, const Array& b);
// Row-wise softmax of a 2-D array, max-shifted.
Array softmax_rows(const Array& a);
// Average pool over the two grid axes of [G x G x D] or [T x G x G x D].
Array avg_pool_grid(const Array& x, std::size_t stride);
// Mean over axis 0: [T x ...] -> [1 x ...].
Array mean_over_time(const Array& x);

namespace ad {

Var matmul(Tape& tape, Var a, Var b);
// a [M x K] times the transpose of b [N x K].
Var matmul_nt(Tape& tape, Var a, Var b);
Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
// Adds bias [N] to every row of a [M x N].
Var add_bias(Tape& tape, Var a, Var bias);
// Adds row t of `embedding` [T x D] to every position of frame t in x [T x L x D].
Var add_frame_embedding(Tape& tape, Var x, Var embedding);
Var sum(Tape& tape, Var a);
Var mean(Tape& tape, Var a);
Var reshape(Tape& tape, Var a, Shape shape);
Var softmax_rows(Tape& tape, Var a);
Var avg_pool_grid(Tape& tape, Var x, std::size_t stride);
Var mean_over_time(Tape& tape, Var x);
// Concatenates 2-D arrays with equal column counts along the rows.
Var concat_rows(Tape& tape, std::span<const Var> parts);
// Concatenates 2-D arrays with equal row counts along the columns.
Var concat_cols(Tape& tape, std::span<const Var> parts);
Var slice_rows(Tape& tape, Var a, std::size_t begin, std::size_t end);
Var slice_cols(Tape& tape, Var a, std::size_t begin, std::size_t end);
// Per-row normalization of a [M x N] with learned gain and offset [N].
Var layer_norm(Tape& tape, Var x, Var gain, Var offset, double eps = 1e-5);
// tanh approximation.
Var gelu(Tape& tape, Var a);
// Mean squared error against a constant target of the same size.
Var mse(Tape& tape, Var prediction, const Array& target);
// Softmax cross-entropy of a logit vector (any shape with C elements).
Var cross_entropy(Tape& tape, Var logits, std::size_t label);

}  // namespace ad
}  // namespace clapper
