#include "clapper/compressors.hpp"

#include <array>
#include <cmath>

#include "clapper/errors.hpp"
#include "clapper/ops.hpp"
#include "clapper/random.hpp"

namespace clapper::compress {
namespace {

constexpr std::array<Strategy, 5> kStrategies = {
    Strategy::kBaseline4x, Strategy::kTemporalPool, Strategy::kSpatialPool, Strategy::kPerceiver,
    Strategy::kTimePerceiver};

std::string layer_name(std::size_t layer, const std::string& leaf) {
  return "compressor.layer" + std::to_string(layer) + "." + leaf;
}

Array uniform_array(Shape shape, double limit, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) {
    x = rng.uniform(-limit, limit);
  }
  return Array(std::move(shape), std::move(v));
}

Array normal_array(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) {
    x = stddev * rng.normal();
  }
  return Array(std::move(shape), std::move(v));
}

// LeCun-style uniform: variance 1 / fan_in.
Array scaled_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return uniform_array({fan_in, fan_out}, std::sqrt(3.0 / static_cast<double>(fan_in)), rng);
}

void check_learned_dims(const Tape& tape, Var frames, const BoundParams& params,
                        const CompressorSpec& spec) {
  const Shape s = tape.shape(frames);
  if (s.size() != 4 || s[1] != s[2]) {
    throw DimensionError("resampler expects frames [T x G x G x D], got " + shape_string(s));
  }
  if (s[0] < 2 || s[0] > 4) {
    throw InputError("resampler takes 2 to 4 frames, got " + std::to_string(s[0]));
  }
  if (s[1] % 4 != 0) {
    throw ConfigError("grid side " + std::to_string(s[1]) + " is not divisible by 4");
  }
  const std::size_t channels = s[3];
  if (spec.heads == 0 || channels % spec.heads != 0) {
    throw ConfigError("head count " + std::to_string(spec.heads) + " does not divide " +
                      std::to_string(channels) + " channels");
  }
  const Shape& wq = tape.shape(params.at(layer_name(0, "wq")));
  if (wq[0] != channels) {
    throw ConfigError("parameters expect " + std::to_string(wq[0]) + " channels, frames have " +
                      std::to_string(channels));
  }
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kBaseline4x:
      return "baseline4x";
    case Strategy::kTemporalPool:
      return "temporal-pool";
    case Strategy::kSpatialPool:
      return "spatial-pool";
    case Strategy::kPerceiver:
      return "perceiver";
    case Strategy::kTimePerceiver:
      return "timeperceiver";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  std::string valid;
  for (Strategy s : kStrategies) {
    if (to_string(s) == name) {
      return s;
    }
    valid += (valid.empty() ? "" : ", ") + to_string(s);
  }
  throw ConfigError("unknown strategy '" + name + "' (valid: " + valid + ")");
}

std::span<const Strategy> all_strategies() { return kStrategies; }

bool is_learned(Strategy s) { return s == Strategy::kPerceiver || s == Strategy::kTimePerceiver; }

std::size_t query_count(const CompressorSpec& spec, std::size_t grid) {
  if (spec.queries != 0) {
    return spec.queries;
  }
  return (grid / 4) * (grid / 4);
}

const Array& ModelParams::at(const std::string& name) const {
  const auto it = arrays.find(name);
  if (it == arrays.end()) {
    throw ConfigError("model has no parameter '" + name + "'");
  }
  return it->second;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, a] : arrays) {
    n += a.size();
  }
  return n;
}

ModelParams init_params(const CompressorSpec& spec, const ModelDims& dims, std::uint64_t seed) {
  if (dims.grid == 0 || dims.grid % 4 != 0) {
    throw ConfigError("grid side must be a positive multiple of 4, got " +
                      std::to_string(dims.grid));
  }
  ModelParams p{spec, dims, {}, 0};
  if (!is_learned(spec.strategy)) {
    return p;
  }
  const std::size_t d = dims.channels;
  if (spec.heads == 0 || d % spec.heads != 0) {
    throw ConfigError("head count " + std::to_string(spec.heads) + " does not divide " +
                      std::to_string(d) + " channels");
  }
  if (spec.depth == 0 || spec.ffn_mult == 0) {
    throw ConfigError("resampler depth and feed-forward width must be positive");
  }
  Rng rng(derive_seed(seed, 1, 0));
  const std::size_t hidden = d * spec.ffn_mult;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    for (const char* norm : {"norm_q", "norm_kv", "norm_ff"}) {
      p.arrays[layer_name(l, std::string(norm) + ".gain")] = Array::filled({d}, 1.0);
      p.arrays[layer_name(l, std::string(norm) + ".offset")] = Array::zeros({d});
    }
    for (const char* proj : {"wq", "wk", "wv", "wo"}) {
      p.arrays[layer_name(l, proj)] = scaled_uniform(d, d, rng);
    }
    p.arrays[layer_name(l, "ff_in.weight")] = scaled_uniform(d, hidden, rng);
    p.arrays[layer_name(l, "ff_in.bias")] = Array::zeros({hidden});
    p.arrays[layer_name(l, "ff_out.weight")] = scaled_uniform(hidden, d, rng);
    p.arrays[layer_name(l, "ff_out.bias")] = Array::zeros({d});
  }
  if (spec.temporal_position) {
    p.arrays["compressor.temporal_pos"] = normal_array({dims.max_frames, d}, 0.1, rng);
  }
  if (spec.strategy == Strategy::kPerceiver) {
    p.arrays["compressor.queries"] = normal_array({query_count(spec, dims.grid), d}, 1.0, rng);
  }
  return p;
}

std::string head_weight(const std::string& task) { return "head." + task + ".weight"; }
std::string head_bias(const std::string& task) { return "head." + task + ".bias"; }

void add_head(ModelParams& params, const std::string& task, std::size_t inputs,
              std::size_t outputs, std::uint64_t seed) {
  // FNV-1a keeps head seeds independent of the standard library's hash
  std::uint64_t tag = 0xcbf29ce484222325ULL;
  for (unsigned char c : task) {
    tag = (tag ^ c) * 0x100000001b3ULL;
  }
  Rng rng(derive_seed(seed, 2, tag));
  params.arrays[head_weight(task)] =
      uniform_array({inputs, outputs}, 1.0 / std::sqrt(static_cast<double>(inputs)), rng);
  params.arrays[head_bias(task)] = Array::zeros({outputs});
}

std::string param_group(const std::string& name) {
  if (name.rfind("compressor.", 0) == 0) {
    return "compressor";
  }
  if (name.rfind("head.", 0) == 0) {
    const auto dot = name.find('.', 5);
    return name.substr(0, dot);
  }
  return name;
}

Var BoundParams::at(const std::string& name) const {
  const auto it = vars_.find(name);
  if (it == vars_.end()) {
    throw ConfigError("parameter '" + name + "' is not bound");
  }
  return it->second;
}

BoundParams bind(Tape& tape, const ModelParams& params,
                 const std::function<bool(const std::string&)>& trainable) {
  BoundParams bound;
  for (const auto& [name, value] : params.arrays) {
    const bool train = !trainable || trainable(name);
    bound.vars_[name] = train ? tape.parameter(value) : tape.constant(value);
  }
  return bound;
}

Var keyframe_compress(Tape& tape, Var frame) {
  const Shape s = tape.shape(frame);
  if (s.size() != 3) {
    throw DimensionError("keyframe_compress expects [G x G x D], got " + shape_string(s));
  }
  const Var pooled = ad::avg_pool_grid(tape, frame, 2);
  const std::size_t side = s[0] / 2;
  return ad::reshape(tape, pooled, {side * side, s[2]});
}

Var spatial_pool_compress(Tape& tape, Var frame) {
  const Shape s = tape.shape(frame);
  if (s.size() != 3) {
    throw DimensionError("spatial_pool_compress expects [G x G x D], got " + shape_string(s));
  }
  const Var pooled = ad::avg_pool_grid(tape, frame, 4);
  const std::size_t side = s[0] / 4;
  return ad::reshape(tape, pooled, {side * side, s[2]});
}

Var temporal_pool_compress(Tape& tape, Var frames) {
  const Shape s = tape.shape(frames);
  if (s.size() != 4) {
    throw DimensionError("temporal_pool_compress expects [T x G x G x D], got " + shape_string(s));
  }
  const Var pooled = ad::avg_pool_grid(tape, frames, 2);
  const Var averaged = ad::mean_over_time(tape, pooled);
  const std::size_t side = s[1] / 2;
  return ad::reshape(tape, averaged, {side * side, s[3]});
}

Var resample(Tape& tape, Var queries, Var frames, const BoundParams& params,
             const CompressorSpec& spec, std::vector<Var>* attention) {
  check_learned_dims(tape, frames, params, spec);
  const Shape fs = tape.shape(frames);
  const std::size_t t = fs[0], positions = fs[1] * fs[2], d = fs[3];
  const Shape qs = tape.shape(queries);
  if (qs.size() != 2 || qs[1] != d) {
    throw DimensionError("queries " + shape_string(qs) + " do not match frames " +
                         shape_string(fs));
  }

  Var tokens = ad::reshape(tape, frames, {t, positions, d});
  if (spec.temporal_position) {
    const Var table = params.at("compressor.temporal_pos");
    if (tape.shape(table)[0] < t) {
      throw ConfigError("temporal position table covers " + std::to_string(tape.shape(table)[0]) +
                        " frames, segment has " + std::to_string(t));
    }
    tokens = ad::add_frame_embedding(tape, tokens, ad::slice_rows(tape, table, 0, t));
  }
  tokens = ad::reshape(tape, tokens, {t * positions, d});

  const std::size_t head_width = d / spec.heads;
  const double score_scale = 1.0 / std::sqrt(static_cast<double>(head_width));
  Var latents = queries;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    const auto p = [&](const char* leaf) { return params.at(layer_name(l, leaf)); };
    const Var kv_parts[] = {latents, tokens};
    const Var kv = ad::concat_rows(tape, kv_parts);
    const Var q_in = ad::layer_norm(tape, latents, p("norm_q.gain"), p("norm_q.offset"));
    const Var kv_in = ad::layer_norm(tape, kv, p("norm_kv.gain"), p("norm_kv.offset"));
    const Var q = ad::matmul(tape, q_in, p("wq"));
    const Var k = ad::matmul(tape, kv_in, p("wk"));
    const Var v = ad::matmul(tape, kv_in, p("wv"));
    std::vector<Var> head_outputs;
    for (std::size_t h = 0; h < spec.heads; ++h) {
      const std::size_t lo = h * head_width, hi = lo + head_width;
      const Var scores = ad::scale(
          tape, ad::matmul_nt(tape, ad::slice_cols(tape, q, lo, hi), ad::slice_cols(tape, k, lo, hi)),
          score_scale);
      const Var weights = ad::softmax_rows(tape, scores);
      if (attention != nullptr) {
        attention->push_back(weights);
      }
      head_outputs.push_back(ad::matmul(tape, weights, ad::slice_cols(tape, v, lo, hi)));
    }
    const Var mixed = ad::matmul(tape, ad::concat_cols(tape, head_outputs), p("wo"));
    latents = ad::add(tape, latents, mixed);

    const Var normed = ad::layer_norm(tape, latents, p("norm_ff.gain"), p("norm_ff.offset"));
    const Var hidden =
        ad::gelu(tape, ad::add_bias(tape, ad::matmul(tape, normed, p("ff_in.weight")),
                                    p("ff_in.bias")));
    const Var ff =
        ad::add_bias(tape, ad::matmul(tape, hidden, p("ff_out.weight")), p("ff_out.bias"));
    latents = ad::add(tape, latents, ff);
  }
  return latents;
}

Var timeperceiver_forward(Tape& tape, Var frames, const BoundParams& params,
                          const CompressorSpec& spec, std::vector<Var>* attention) {
  check_learned_dims(tape, frames, params, spec);
  const Shape fs = tape.shape(frames);
  const std::size_t side = fs[1] / 4;
  const Var pooled = ad::avg_pool_grid(tape, frames, 4);
  const Var averaged = ad::mean_over_time(tape, pooled);
  const Var queries = ad::reshape(tape, averaged, {side * side, fs[3]});
  return resample(tape, queries, frames, params, spec, attention);
}

Var perceiver_forward(Tape& tape, Var frames, const BoundParams& params,
                      const CompressorSpec& spec, std::vector<Var>* attention) {
  return resample(tape, params.at("compressor.queries"), frames, params, spec, attention);
}

Array keyframe_compress(const Array& frame) {
  Tape tape;
  return tape.value(keyframe_compress(tape, tape.constant(frame)));
}

Array spatial_pool_compress(const Array& frame) {
  Tape tape;
  return tape.value(spatial_pool_compress(tape, tape.constant(frame)));
}

Array temporal_pool_compress(const Array& frames) {
  Tape tape;
  return tape.value(temporal_pool_compress(tape, tape.constant(frames)));
}

Array timeperceiver_forward(const Array& frames, const ModelParams& params) {
  Tape tape;
  tape.set_grad_enabled(false);
  const BoundParams bound = bind(tape, params);
  return tape.value(timeperceiver_forward(tape, tape.constant(frames), bound, params.spec));
}

Array perceiver_forward(const Array& frames, const ModelParams& params) {
  Tape tape;
  tape.set_grad_enabled(false);
  const BoundParams bound = bind(tape, params);
  return tape.value(perceiver_forward(tape, tape.constant(frames), bound, params.spec));
}

}  // namespace clapper::compress
