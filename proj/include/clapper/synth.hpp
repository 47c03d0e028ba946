#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "clapper/array.hpp"

namespace clapper::synth {

// Stand-in for vision-encoder output: values has shape [T x G x G x D].
struct FrameFeatureClip {
  std::size_t frames = 0;
  std::size_t grid = 0;
  std::size_t channels = 0;
  Array values;
  std::uint64_t seed = 0;

  std::size_t positions() const { return grid * grid; }
  // One frame as [G x G x D].
  Array frame(std::size_t t) const;
};

enum class TaskKind { kChangeDirection, kChangedCell, kCaptionRegression };

std::string to_string(TaskKind kind);
TaskKind task_from_string(const std::string& name);

// Construction parameters of a generated sample; enough to re-derive the label.
struct Recipe {
  std::size_t changed_cell = 0;
  bool ramps_up = false;
  double base = 0.0;
  double step = 0.0;
  std::vector<std::size_t> moving_cells;
  std::vector<double> slopes;
};

struct SyntheticSample {
  FrameFeatureClip clip;
  TaskKind kind = TaskKind::kChangeDirection;
  std::size_t label = 0;  // classification tasks
  Array target;           // caption regression
  Recipe recipe;
};

inline constexpr std::size_t kTaskFrames = 4;
inline constexpr std::size_t kCaptionTargets = 4;

// Values are snapped to multiples of this so that sums of a handful of them
// are exact in double precision.
inline constexpr double kQuantum = 0x1.0p-16;

// Deterministic smooth pseudo-features. Requires G divisible by 4.
FrameFeatureClip mock_encode(std::size_t frames, std::size_t grid, std::size_t channels,
                             std::uint64_t seed);

// One cell's magnitude ramps up (label 1) or down (label 0) over 4 frames; the
// down clip is the exact time reversal of the up clip, so both share one
// temporal mean.
SyntheticSample gen_change_direction(std::size_t grid, std::size_t channels, std::uint64_t seed);

// One cell flashes in the first and last frame; label is its row-major index.
SyntheticSample gen_changed_cell(std::size_t grid, std::size_t channels, std::uint64_t seed);

// A few cells drift linearly; the target is caption_target() of the clip.
SyntheticSample gen_caption_regression(std::size_t grid, std::size_t channels, std::uint64_t seed);

SyntheticSample generate(TaskKind kind, std::size_t grid, std::size_t channels, std::uint64_t seed);

// Per-quadrant net change (last frame minus first), summed over channels and
// averaged over the quadrant's cells. Linear in the clip.
Array caption_target(const FrameFeatureClip& clip);

// Same clip with frame order reversed.
FrameFeatureClip reverse_time(const FrameFeatureClip& clip);

// Sample `index` of a corpus drawn under `seed`.
std::uint64_t sample_seed(std::uint64_t seed, TaskKind kind, std::uint64_t index);
std::vector<SyntheticSample> make_corpus(TaskKind kind, std::size_t count, std::size_t grid,
                                         std::size_t channels, std::uint64_t seed);

nlohmann::json to_json(const SyntheticSample& sample);
SyntheticSample sample_from_json(const nlohmann::json& j);

}  // namespace clapper::synth
