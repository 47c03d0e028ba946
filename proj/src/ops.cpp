#include "clapper/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "clapper/errors.hpp"

namespace clapper {
namespace {

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + " expects a rank-" + std::to_string(rank) +
                         " array, got " + shape_string(shape));
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + " shape mismatch: " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

// c[M x N] += a[M x K] * b[K x N]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  // k is blocked so a panel of b stays in cache; four rows of c share each
  // pass over a b row.
  constexpr std::size_t kPanel = 64;
  for (std::size_t p0 = 0; p0 < k; p0 += kPanel) {
    const std::size_t p1 = std::min(k, p0 + kPanel);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      double* c0 = c + i * n;
      double* c1 = c0 + n;
      double* c2 = c1 + n;
      double* c3 = c2 + n;
      for (std::size_t p = p0; p < p1; ++p) {
        const double a0 = a[i * k + p], a1 = a[(i + 1) * k + p];
        const double a2 = a[(i + 2) * k + p], a3 = a[(i + 3) * k + p];
        const double* b_row = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
          const double bv = b_row[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      double* c_row = c + i * n;
      for (std::size_t p = p0; p < p1; ++p) {
        const double av = a[i * k + p];
        const double* b_row = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
          c_row[j] += av * b_row[j];
        }
      }
    }
  }
}

// c[M x N] += a[M x K] * b[N x K]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* b_row = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += a_row[p] * b_row[p];
      }
      c[i * n + j] += acc;
    }
  }
}

// c[K x N] += a[M x K]^T * b[M x N]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    const double* b_row = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_row[p];
      if (av == 0.0) {
        continue;
      }
      double* c_row = c + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        c_row[j] += av * b_row[j];
      }
    }
  }
}

struct PoolGeometry {
  std::size_t frames;
  std::size_t grid;
  std::size_t channels;
  std::size_t stride;
  std::size_t out_grid;
};

PoolGeometry pool_geometry(const Shape& shape, std::size_t stride) {
  if (shape.size() != 3 && shape.size() != 4) {
    throw DimensionError("avg_pool_grid expects [G x G x D] or [T x G x G x D], got " +
                         shape_string(shape));
  }
  const std::size_t off = shape.size() - 3;
  PoolGeometry g{off == 1 ? shape[0] : 1, shape[off], shape[off + 2], stride, 0};
  if (shape[off] != shape[off + 1]) {
    throw DimensionError("avg_pool_grid expects a square grid, got " + shape_string(shape));
  }
  if (stride == 0 || g.grid % stride != 0) {
    throw ConfigError("pooling stride " + std::to_string(stride) + " does not divide grid side " +
                      std::to_string(g.grid));
  }
  g.out_grid = g.grid / stride;
  return g;
}

Shape pooled_shape(const Shape& in, const PoolGeometry& g) {
  Shape out = in;
  const std::size_t off = in.size() - 3;
  out[off] = g.out_grid;
  out[off + 1] = g.out_grid;
  return out;
}

std::vector<double> pool_forward(std::span<const double> x, const PoolGeometry& g) {
  const std::size_t d = g.channels;
  std::vector<double> out(g.frames * g.out_grid * g.out_grid * d, 0.0);
  const double inv = 1.0 / static_cast<double>(g.stride * g.stride);
  for (std::size_t t = 0; t < g.frames; ++t) {
    const double* frame = x.data() + t * g.grid * g.grid * d;
    double* dst = out.data() + t * g.out_grid * g.out_grid * d;
    for (std::size_t i = 0; i < g.grid; ++i) {
      for (std::size_t j = 0; j < g.grid; ++j) {
        const double* src = frame + (i * g.grid + j) * d;
        double* cell = dst + ((i / g.stride) * g.out_grid + j / g.stride) * d;
        for (std::size_t c = 0; c < d; ++c) {
          cell[c] += src[c];
        }
      }
    }
  }
  for (double& v : out) {
    v *= inv;
  }
  return out;
}

std::vector<double> softmax_forward(std::span<const double> a, std::size_t rows, std::size_t cols) {
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = a.data() + r * cols;
    double* o = out.data() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - peak);
      total += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] /= total;
    }
  }
  return out;
}

std::vector<double> mean_time_forward(std::span<const double> x, std::size_t frames) {
  const std::size_t inner = x.size() / frames;
  std::vector<double> out(inner, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = x.data() + t * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      out[i] += src[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(frames);
  for (double& v : out) {
    v *= inv;
  }
  return out;
}

Shape mean_time_shape(const Shape& in) {
  if (in.empty()) {
    throw DimensionError("mean_over_time needs at least one axis");
  }
  if (in[0] == 0) {
    throw InputError("mean_over_time over zero frames");
  }
  Shape out = in;
  out[0] = 1;
  return out;
}

constexpr double kGeluC = 0.044715;

}  // namespace

Array matmul(const Array& a, const Array& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return Array({m, n}, std::move(out));
}

Array softmax_rows(const Array& a) {
  require_rank(a.shape(), 2, "softmax_rows");
  return Array(a.shape(), softmax_forward(a.values(), a.dim(0), a.dim(1)));
}

Array avg_pool_grid(const Array& x, std::size_t stride) {
  const PoolGeometry g = pool_geometry(x.shape(), stride);
  return Array(pooled_shape(x.shape(), g), pool_forward(x.values(), g));
}

Array mean_over_time(const Array& x) {
  Shape out = mean_time_shape(x.shape());
  return Array(std::move(out), mean_time_forward(x.values(), x.dim(0)));
}

namespace ad {

Var matmul(Tape& tape, Var a, Var b) {
  Array out = clapper::matmul(tape.value(a), tape.value(b));
  const Var inputs[] = {a, b};
  return tape.record(std::move(out), inputs,
                     [a, b](const Tape& t, Var, std::span<const double> g, GradientBuffers& grads) {
                       const Array& av = t.value(a);
                       const Array& bv = t.value(b);
                       const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
                       if (t.requires_grad(a)) {
                         gemm_nt(g.data(), bv.values().data(), grads[a].data(), m, n, k);
                       }
                       if (t.requires_grad(b)) {
                         gemm_tn(av.values().data(), g.data(), grads[b].data(), m, k, n);
                       }
                     });
}

Var matmul_nt(Tape& tape, Var a, Var b) {
  const Array& av = tape.value(a);
  const Array& bv = tape.value(b);
  require_rank(av.shape(), 2, "matmul_nt");
  require_rank(bv.shape(), 2, "matmul_nt");
  if (av.dim(1) != bv.dim(1)) {
    throw DimensionError("matmul_nt inner extents differ: " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
  std::vector<double> out(m * n, 0.0);
  gemm_nt(av.values().data(), bv.values().data(), out.data(), m, k, n);
  const Var inputs[] = {a, b};
  return tape.record(Array({m, n}, std::move(out)), inputs,
                     [a, b, m, k, n](const Tape& t, Var, std::span<const double> g,
                                     GradientBuffers& grads) {
                       if (t.requires_grad(a)) {
                         gemm_nn(g.data(), t.value(b).values().data(), grads[a].data(), m, n, k);
                       }
                       if (t.requires_grad(b)) {
                         gemm_tn(g.data(), t.value(a).values().data(), grads[b].data(), m, n, k);
                       }
                     });
}

Var add(Tape& tape, Var a, Var b) {
  const Array& av = tape.value(a);
  const Array& bv = tape.value(b);
  require_same_shape(av.shape(), bv.shape(), "add");
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] + bv[i];
  }
  const Var inputs[] = {a, b};
  return tape.record(Array(av.shape(), std::move(out)), inputs,
                     [a, b](const Tape& t, Var, std::span<const double> g, GradientBuffers& grads) {
                       for (Var in : {a, b}) {
                         if (t.requires_grad(in)) {
                           auto dst = grads[in];
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             dst[i] += g[i];
                           }
                         }
                       }
                     });
}

Var sub(Tape& tape, Var a, Var b) {
  const Array& av = tape.value(a);
  const Array& bv = tape.value(b);
  require_same_shape(av.shape(), bv.shape(), "sub");
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] - bv[i];
  }
  const Var inputs[] = {a, b};
  return tape.record(Array(av.shape(), std::move(out)), inputs,
                     [a, b](const Tape& t, Var, std::span<const double> g, GradientBuffers& grads) {
                       if (t.requires_grad(a)) {
                         auto dst = grads[a];
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           dst[i] += g[i];
                         }
                       }
                       if (t.requires_grad(b)) {
                         auto dst = grads[b];
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           dst[i] -= g[i];
                         }
                       }
                     });
}

Var mul(Tape& tape, Var a, Var b) {
  const Array& av = tape.value(a);
  const Array& bv = tape.value(b);
  require_same_shape(av.shape(), bv.shape(), "mul");
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] * bv[i];
  }
  const Var inputs[] = {a, b};
  return tape.record(Array(av.shape(), std::move(out)), inputs,
                     [a, b](const Tape& t, Var, std::span<const double> g, GradientBuffers& grads) {
                       const Array& av = t.value(a);
                       const Array& bv = t.value(b);
                       if (t.requires_grad(a)) {
                         auto dst = grads[a];
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           dst[i] += g[i] * bv[i];
                         }
                       }
                       if (t.requires_grad(b)) {
                         auto dst = grads[b];
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           dst[i] += g[i] * av[i];
                         }
                       }
                     });
}

Var scale(Tape& tape, Var a, double factor) {
  const Array& av = tape.value(a);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] * factor;
  }
  const Var inputs[] = {a};
  return tape.record(Array(av.shape(), std::move(out)), inputs,
                     [a, factor](const Tape&, Var, std::span<const double> g,
                                 GradientBuffers& grads) {
                       auto dst = grads[a];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         dst[i] += g[i] * factor;
                       }
                     });
}

Var add_bias(Tape& tape, Var a, Var bias) {
  const Array& av = tape.value(a);
  const Array& bv = tape.value(bias);
  require_rank(av.shape(), 2, "add_bias");
  if (bv.size() != av.dim(1)) {
    throw DimensionError("add_bias: bias " + shape_string(bv.shape()) + " does not match rows of " +
                         shape_string(av.shape()));
  }
  const std::size_t rows = av.dim(0), cols = av.dim(1);
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = av[r * cols + c] + bv[c];
    }
  }
  const Var inputs[] = {a, bias};
  return tape.record(Array(av.shape(), std::move(out)), inputs,
                     [a, bias, rows, cols](const Tape& t, Var, std::span<const double> g,
                                           GradientBuffers& grads) {
                       if (t.requires_grad(a)) {
                         auto dst = grads[a];
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           dst[i] += g[i];
                         }
                       }
                       if (t.requires_grad(bias)) {
                         auto dst = grads[bias];
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < cols; ++c) {
                             dst[c] += g[r * cols + c];
                           }
                         }
                       }
                     });
}

Var add_frame_embedding(Tape& tape, Var x, Var embedding) {
  const Array& xv = tape.value(x);
  const Array& ev = tape.value(embedding);
  require_rank(xv.shape(), 3, "add_frame_embedding");
  require_rank(ev.shape(), 2, "add_frame_embedding");
  if (ev.dim(0) != xv.dim(0) || ev.dim(1) != xv.dim(2)) {
    throw DimensionError("add_frame_embedding: embedding " + shape_string(ev.shape()) +
                         " does not fit frames " + shape_string(xv.shape()));
  }
  const std::size_t frames = xv.dim(0), positions = xv.dim(1), channels = xv.dim(2);
  std::vector<double> out(xv.size());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t p = 0; p < positions; ++p) {
      const std::size_t base = (t * positions + p) * channels;
      for (std::size_t c = 0; c < channels; ++c) {
        out[base + c] = xv[base + c] + ev[t * channels + c];
      }
    }
  }
  const Var inputs[] = {x, embedding};
  return tape.record(Array(xv.shape(), std::move(out)), inputs,
                     [x, embedding, frames, positions, channels](
                         const Tape& t, Var, std::span<const double> g, GradientBuffers& grads) {
                       if (t.requires_grad(x)) {
                         auto dst = grads[x];
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           dst[i] += g[i];
                         }
                       }
                       if (t.requires_grad(embedding)) {
                         auto dst = grads[embedding];
                         for (std::size_t f = 0; f < frames; ++f) {
                           for (std::size_t p = 0; p < positions; ++p) {
                             const std::size_t base = (f * positions + p) * channels;
                             for (std::size_t c = 0; c < channels; ++c) {
                               dst[f * channels + c] += g[base + c];
                             }
                           }
                         }
                       }
                     });
}

Var sum(Tape& tape, Var a) {
  const Array& av = tape.value(a);
  double total = 0.0;
  for (double v : av.values()) {
    total += v;
  }
  const Var inputs[] = {a};
  return tape.record(Array::scalar(total), inputs,
                     [a](const Tape&, Var, std::span<const double> g, GradientBuffers& grads) {
                       for (double& d : grads[a]) {
                         d += g[0];
                       }
                     });
}

Var mean(Tape& tape, Var a) {
  const std::size_t n = tape.value(a).size();
  if (n == 0) {
    throw InputError("mean of an empty array");
  }
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(n));
}

Var reshape(Tape& tape, Var a, Shape shape) {
  Array out = tape.value(a).reshaped(std::move(shape));
  const Var inputs[] = {a};
  return tape.record(std::move(out), inputs,
                     [a](const Tape&, Var, std::span<const double> g, GradientBuffers& grads) {
                       auto dst = grads[a];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         dst[i] += g[i];
                       }
                     });
}

Var softmax_rows(Tape& tape, Var a) {
  Array out = clapper::softmax_rows(tape.value(a));
  const std::size_t rows = out.dim(0), cols = out.dim(1);
  const Var inputs[] = {a};
  return tape.record(std::move(out), inputs,
                     [a, rows, cols](const Tape& t, Var self, std::span<const double> g,
                                     GradientBuffers& grads) {
                       const Array& y = t.value(self);
                       auto dst = grads[a];
                       for (std::size_t r = 0; r < rows; ++r) {
                         double dot = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) {
                           dot += g[r * cols + c] * y[r * cols + c];
                         }
                         for (std::size_t c = 0; c < cols; ++c) {
                           dst[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
                         }
                       }
                     });
}

Var avg_pool_grid(Tape& tape, Var x, std::size_t stride) {
  const Array& xv = tape.value(x);
  const PoolGeometry geo = pool_geometry(xv.shape(), stride);
  Array out(pooled_shape(xv.shape(), geo), pool_forward(xv.values(), geo));
  const Var inputs[] = {x};
  return tape.record(std::move(out), inputs,
                     [x, geo](const Tape&, Var, std::span<const double> g, GradientBuffers& grads) {
                       auto dst = grads[x];
                       const std::size_t d = geo.channels;
                       const double inv = 1.0 / static_cast<double>(geo.stride * geo.stride);
                       for (std::size_t t = 0; t < geo.frames; ++t) {
                         double* frame = dst.data() + t * geo.grid * geo.grid * d;
                         const double* src = g.data() + t * geo.out_grid * geo.out_grid * d;
                         for (std::size_t i = 0; i < geo.grid; ++i) {
                           for (std::size_t j = 0; j < geo.grid; ++j) {
                             const double* cell =
                                 src + ((i / geo.stride) * geo.out_grid + j / geo.stride) * d;
                             double* out_cell = frame + (i * geo.grid + j) * d;
                             for (std::size_t c = 0; c < d; ++c) {
                               out_cell[c] += cell[c] * inv;
                             }
                           }
                         }
                       }
                     });
}

Var mean_over_time(Tape& tape, Var x) {
  const Array& xv = tape.value(x);
  Shape shape = mean_time_shape(xv.shape());
  const std::size_t frames = xv.dim(0);
  Array out(std::move(shape), mean_time_forward(xv.values(), frames));
  const Var inputs[] = {x};
  return tape.record(std::move(out), inputs,
                     [x, frames](const Tape&, Var, std::span<const double> g,
                                 GradientBuffers& grads) {
                       auto dst = grads[x];
                       const double inv = 1.0 / static_cast<double>(frames);
                       for (std::size_t t = 0; t < frames; ++t) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           dst[t * g.size() + i] += g[i] * inv;
                         }
                       }
                     });
}

Var concat_rows(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) {
    throw InputError("concat_rows of nothing");
  }
  const std::size_t cols = tape.value(parts[0]).shape().size() == 2 ? tape.value(parts[0]).dim(1) : 0;
  std::size_t rows = 0;
  for (Var p : parts) {
    const Shape& s = tape.shape(p);
    require_rank(s, 2, "concat_rows");
    if (s[1] != cols) {
      throw DimensionError("concat_rows column mismatch: " + shape_string(tape.shape(parts[0])) +
                           " vs " + shape_string(s));
    }
    rows += s[0];
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (Var p : parts) {
    const auto v = tape.value(p).values();
    out.insert(out.end(), v.begin(), v.end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(Array({rows, cols}, std::move(out)), inputs,
                     [inputs](const Tape& t, Var, std::span<const double> g,
                              GradientBuffers& grads) {
                       std::size_t offset = 0;
                       for (Var p : inputs) {
                         const std::size_t n = t.value(p).size();
                         if (t.requires_grad(p)) {
                           auto dst = grads[p];
                           for (std::size_t i = 0; i < n; ++i) {
                             dst[i] += g[offset + i];
                           }
                         }
                         offset += n;
                       }
                     });
}

Var concat_cols(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) {
    throw InputError("concat_cols of nothing");
  }
  require_rank(tape.shape(parts[0]), 2, "concat_cols");
  const std::size_t rows = tape.shape(parts[0])[0];
  std::vector<std::size_t> widths;
  std::size_t cols = 0;
  for (Var p : parts) {
    const Shape& s = tape.shape(p);
    require_rank(s, 2, "concat_cols");
    if (s[0] != rows) {
      throw DimensionError("concat_cols row mismatch: " + shape_string(tape.shape(parts[0])) +
                           " vs " + shape_string(s));
    }
    widths.push_back(s[1]);
    cols += s[1];
  }
  std::vector<double> out(rows * cols);
  std::size_t col0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array& v = tape.value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < widths[k]; ++c) {
        out[r * cols + col0 + c] = v[r * widths[k] + c];
      }
    }
    col0 += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(Array({rows, cols}, std::move(out)), inputs,
                     [inputs, widths, rows, cols](const Tape& t, Var, std::span<const double> g,
                                                  GradientBuffers& grads) {
                       std::size_t first = 0;
                       for (std::size_t k = 0; k < inputs.size(); ++k) {
                         if (t.requires_grad(inputs[k])) {
                           auto dst = grads[inputs[k]];
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < widths[k]; ++c) {
                               dst[r * widths[k] + c] += g[r * cols + first + c];
                             }
                           }
                         }
                         first += widths[k];
                       }
                     });
}

Var slice_rows(Tape& tape, Var a, std::size_t begin, std::size_t end) {
  const Array& av = tape.value(a);
  require_rank(av.shape(), 2, "slice_rows");
  if (begin > end || end > av.dim(0)) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(av.shape()));
  }
  const std::size_t cols = av.dim(1);
  const auto v = av.values();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                          v.begin() + static_cast<std::ptrdiff_t>(end * cols));
  const Var inputs[] = {a};
  return tape.record(Array({end - begin, cols}, std::move(out)), inputs,
                     [a, begin, cols](const Tape&, Var, std::span<const double> g,
                                      GradientBuffers& grads) {
                       auto dst = grads[a];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         dst[begin * cols + i] += g[i];
                       }
                     });
}

Var slice_cols(Tape& tape, Var a, std::size_t begin, std::size_t end) {
  const Array& av = tape.value(a);
  require_rank(av.shape(), 2, "slice_cols");
  if (begin > end || end > av.dim(1)) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(av.shape()));
  }
  const std::size_t rows = av.dim(0), cols = av.dim(1), width = end - begin;
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      out[r * width + c] = av[r * cols + begin + c];
    }
  }
  const Var inputs[] = {a};
  return tape.record(Array({rows, width}, std::move(out)), inputs,
                     [a, begin, rows, cols, width](const Tape&, Var, std::span<const double> g,
                                                   GradientBuffers& grads) {
                       auto dst = grads[a];
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < width; ++c) {
                           dst[r * cols + begin + c] += g[r * width + c];
                         }
                       }
                     });
}

Var layer_norm(Tape& tape, Var x, Var gain, Var offset, double eps) {
  const Array& xv = tape.value(x);
  require_rank(xv.shape(), 2, "layer_norm");
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  if (tape.value(gain).size() != cols || tape.value(offset).size() != cols) {
    throw DimensionError("layer_norm: gain/offset do not match width of " +
                         shape_string(xv.shape()));
  }
  const Array& gv = tape.value(gain);
  const Array& bv = tape.value(offset);
  // normalized values and per-row inverse std are kept for the backward rule
  std::vector<double> normalized(xv.size());
  std::vector<double> inv_std(rows);
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.values().data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      mu += row[c];
    }
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      var += (row[c] - mu) * (row[c] - mu);
    }
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double n = (row[c] - mu) * inv_std[r];
      normalized[r * cols + c] = n;
      out[r * cols + c] = n * gv[c] + bv[c];
    }
  }
  const Var inputs[] = {x, gain, offset};
  return tape.record(
      Array(xv.shape(), std::move(out)), inputs,
      [x, gain, offset, rows, cols, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](const Tape& t, Var, std::span<const double> g,
                                     GradientBuffers& grads) {
        const Array& gv = t.value(gain);
        if (t.requires_grad(gain)) {
          auto dst = grads[gain];
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              dst[c] += g[r * cols + c] * normalized[r * cols + c];
            }
          }
        }
        if (t.requires_grad(offset)) {
          auto dst = grads[offset];
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              dst[c] += g[r * cols + c];
            }
          }
        }
        if (t.requires_grad(x)) {
          auto dst = grads[x];
          const double inv_n = 1.0 / static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dn = 0.0;
            double mean_dn_n = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dn = g[r * cols + c] * gv[c];
              mean_dn += dn;
              mean_dn_n += dn * normalized[r * cols + c];
            }
            mean_dn *= inv_n;
            mean_dn_n *= inv_n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dn = g[r * cols + c] * gv[c];
              dst[r * cols + c] +=
                  inv_std[r] * (dn - mean_dn - normalized[r * cols + c] * mean_dn_n);
            }
          }
        }
      });
}

Var gelu(Tape& tape, Var a) {
  const Array& av = tape.value(a);
  const double k = std::sqrt(2.0 / std::numbers::pi);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = av[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(k * (v + kGeluC * v * v * v)));
  }
  const Var inputs[] = {a};
  return tape.record(Array(av.shape(), std::move(out)), inputs,
                     [a, k](const Tape& t, Var, std::span<const double> g, GradientBuffers& grads) {
                       const Array& av = t.value(a);
                       auto dst = grads[a];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double v = av[i];
                         const double th = std::tanh(k * (v + kGeluC * v * v * v));
                         const double dth = (1.0 - th * th) * k * (1.0 + 3.0 * kGeluC * v * v);
                         dst[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * v * dth);
                       }
                     });
}

Var mse(Tape& tape, Var prediction, const Array& target) {
  const Array& pv = tape.value(prediction);
  if (pv.size() != target.size() || pv.size() == 0) {
    throw DimensionError("mse: prediction " + shape_string(pv.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  const double inv = 1.0 / static_cast<double>(pv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - target[i];
    total += d * d;
  }
  const Var inputs[] = {prediction};
  return tape.record(Array::scalar(total * inv), inputs,
                     [prediction, target, inv](const Tape& t, Var, std::span<const double> g,
                                               GradientBuffers& grads) {
                       const Array& pv = t.value(prediction);
                       auto dst = grads[prediction];
                       for (std::size_t i = 0; i < dst.size(); ++i) {
                         dst[i] += g[0] * 2.0 * inv * (pv[i] - target[i]);
                       }
                     });
}

Var cross_entropy(Tape& tape, Var logits, std::size_t label) {
  const Array& lv = tape.value(logits);
  if (label >= lv.size()) {
    throw InputError("cross_entropy label " + std::to_string(label) + " outside " +
                     std::to_string(lv.size()) + " classes");
  }
  std::vector<double> probs = softmax_forward(lv.values(), 1, lv.size());
  const double loss = -std::log(std::max(probs[label], 1e-300));
  const Var inputs[] = {logits};
  return tape.record(Array::scalar(loss), inputs,
                     [logits, label, probs = std::move(probs)](
                         const Tape&, Var, std::span<const double> g, GradientBuffers& grads) {
                       auto dst = grads[logits];
                       for (std::size_t i = 0; i < dst.size(); ++i) {
                         dst[i] += g[0] * (probs[i] - (i == label ? 1.0 : 0.0));
                       }
                     });
}

}  // namespace ad
}  // namespace clapper
