#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "clapper/array.hpp"
#include "clapper/optim.hpp"
#include "clapper/tape.hpp"

namespace clapper::compress {

enum class Strategy { kBaseline4x, kTemporalPool, kSpatialPool, kPerceiver, kTimePerceiver };

std::string to_string(Strategy s);
// Throws ConfigError listing the valid names.
Strategy strategy_from_string(const std::string& name);
std::span<const Strategy> all_strategies();
// Perceiver-style strategies own learnable compressor weights.
bool is_learned(Strategy s);

struct CompressorSpec {
  Strategy strategy = Strategy::kTimePerceiver;
  std::size_t queries = 0;  // 0 selects (G/4)^2
  std::size_t heads = 4;
  bool temporal_position = true;
  std::size_t depth = 1;
  std::size_t ffn_mult = 4;
};

struct ModelDims {
  std::size_t grid = 8;
  std::size_t channels = 16;
  std::size_t max_frames = 4;
};

// Query count actually used by the learned strategies at grid side `grid`.
std::size_t query_count(const CompressorSpec& spec, std::size_t grid);

// Learnable arrays keyed by dotted name. Names under "compressor." belong to
// the resampler, "head.<task>." to a downstream linear head.
struct ModelParams {
  CompressorSpec spec;
  ModelDims dims;
  ParamMap arrays;
  int stage = 0;  // 0 untrained, 1 after warm-up, 2 after fine-tuning

  const Array& at(const std::string& name) const;
  bool contains(const std::string& name) const { return arrays.contains(name); }
  std::size_t parameter_count() const;
};

ModelParams init_params(const CompressorSpec& spec, const ModelDims& dims, std::uint64_t seed);

// Adds (or replaces) head.<task>.weight [inputs x outputs] and head.<task>.bias.
void add_head(ModelParams& params, const std::string& task, std::size_t inputs,
              std::size_t outputs, std::uint64_t seed);

std::string head_weight(const std::string& task);
std::string head_bias(const std::string& task);

// Parameter group of a name: "compressor" or "head.<task>".
std::string param_group(const std::string& name);

// ModelParams registered on one tape, each array exactly once.
class BoundParams {
 public:
  BoundParams() = default;
  // Wraps Vars already recorded on a tape.
  explicit BoundParams(std::map<std::string, Var> vars) : vars_(std::move(vars)) {}

  Var at(const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.contains(name); }
  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  friend BoundParams bind(Tape& tape, const ModelParams& params,
                          const std::function<bool(const std::string&)>& trainable);
  std::map<std::string, Var> vars_;
};

// Trainable names become tape parameters, the rest constants. A null
// predicate makes everything trainable.
BoundParams bind(Tape& tape, const ModelParams& params,
                 const std::function<bool(const std::string&)>& trainable = {});

// [G x G x D] -> [(G/2)^2 x D]
Var keyframe_compress(Tape& tape, Var frame);
// [G x G x D] -> [(G/4)^2 x D]
Var spatial_pool_compress(Tape& tape, Var frame);
// [T x G x G x D] -> [(G/2)^2 x D]: baseline pooling per frame, then a time mean.
Var temporal_pool_compress(Tape& tape, Var frames);

// Queries are the time mean of stride-4 pooled frames.
Var timeperceiver_forward(Tape& tape, Var frames, const BoundParams& params,
                          const CompressorSpec& spec, std::vector<Var>* attention = nullptr);
// Queries are the learned compressor.queries array.
Var perceiver_forward(Tape& tape, Var frames, const BoundParams& params,
                      const CompressorSpec& spec, std::vector<Var>* attention = nullptr);

// Cross-attention resampler shared by both perceivers: `queries` [Q x D]
// attend over concat(queries, frame tokens).
Var resample(Tape& tape, Var queries, Var frames, const BoundParams& params,
             const CompressorSpec& spec, std::vector<Var>* attention = nullptr);

Array keyframe_compress(const Array& frame);
Array spatial_pool_compress(const Array& frame);
Array temporal_pool_compress(const Array& frames);
Array timeperceiver_forward(const Array& frames, const ModelParams& params);
Array perceiver_forward(const Array& frames, const ModelParams& params);

}  // namespace clapper::compress
