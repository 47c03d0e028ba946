#include "clapper/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "clapper/errors.hpp"
#include "clapper/random.hpp"

namespace clapper::synth {
namespace {

constexpr int kWaves = 3;
constexpr int kFormatVersion = 1;
constexpr double kBackgroundScale = 0.125;

double quantize(double v, double quantum = kQuantum) { return std::round(v / quantum) * quantum; }

void check_grid(std::size_t grid, std::size_t channels) {
  if (grid == 0 || grid % 4 != 0) {
    throw ConfigError("grid side must be a positive multiple of 4, got " + std::to_string(grid));
  }
  if (channels == 0) {
    throw ConfigError("channel count must be positive");
  }
}

// Static smooth background shared by every task, scaled down so the planted
// signal dominates.
std::vector<double> background(std::size_t grid, std::size_t channels, std::uint64_t seed) {
  const FrameFeatureClip bg = mock_encode(1, grid, channels, seed);
  std::vector<double> out(bg.values.values().begin(), bg.values.values().end());
  for (double& v : out) {
    v = quantize(kBackgroundScale * v);
  }
  return out;
}

std::vector<double> positive_direction(Rng& rng, std::size_t channels) {
  std::vector<double> u(channels);
  for (double& v : u) {
    v = quantize(rng.uniform(0.5, 1.0), 0x1.0p-8);
  }
  return u;
}

FrameFeatureClip make_clip(std::size_t grid, std::size_t channels, std::uint64_t seed,
                           const std::vector<double>& frame_values) {
  FrameFeatureClip clip;
  clip.frames = kTaskFrames;
  clip.grid = grid;
  clip.channels = channels;
  clip.seed = seed;
  clip.values = Array({kTaskFrames, grid, grid, channels}, frame_values);
  return clip;
}

std::vector<double> repeat_frames(const std::vector<double>& frame) {
  std::vector<double> out;
  out.reserve(frame.size() * kTaskFrames);
  for (std::size_t t = 0; t < kTaskFrames; ++t) {
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

}  // namespace

Array FrameFeatureClip::frame(std::size_t t) const {
  if (t >= frames) {
    throw InputError("frame index " + std::to_string(t) + " outside clip of " +
                     std::to_string(frames) + " frames");
  }
  const std::size_t n = grid * grid * channels;
  const auto v = values.values();
  return Array({grid, grid, channels},
               std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(t * n),
                                   v.begin() + static_cast<std::ptrdiff_t>((t + 1) * n)));
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kChangeDirection:
      return "change-direction";
    case TaskKind::kChangedCell:
      return "changed-cell";
    case TaskKind::kCaptionRegression:
      return "caption-regression";
  }
  return "unknown";
}

TaskKind task_from_string(const std::string& name) {
  for (TaskKind k :
       {TaskKind::kChangeDirection, TaskKind::kChangedCell, TaskKind::kCaptionRegression}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw ConfigError("unknown task '" + name +
                    "' (valid: change-direction, changed-cell, caption-regression)");
}

FrameFeatureClip mock_encode(std::size_t frames, std::size_t grid, std::size_t channels,
                             std::uint64_t seed) {
  check_grid(grid, channels);
  if (frames == 0) {
    throw InputError("mock_encode needs at least one frame");
  }
  struct Wave {
    double amplitude, fx, fy, ft, phase;
  };
  Rng rng(seed);
  std::vector<Wave> waves(channels * kWaves);
  const double spatial = 2.0 * std::numbers::pi / static_cast<double>(grid);
  for (Wave& w : waves) {
    w.amplitude = rng.uniform(0.2, 0.8);
    w.fx = spatial * rng.uniform(0.0, 2.0);
    w.fy = spatial * rng.uniform(0.0, 2.0);
    w.ft = rng.uniform(0.0, 0.5);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  std::vector<double> values(frames * grid * grid * channels);
  std::size_t at = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < grid; ++i) {
      for (std::size_t j = 0; j < grid; ++j) {
        for (std::size_t d = 0; d < channels; ++d) {
          double v = 0.0;
          for (int k = 0; k < kWaves; ++k) {
            const Wave& w = waves[d * kWaves + k];
            v += w.amplitude * std::sin(w.fx * static_cast<double>(i) +
                                        w.fy * static_cast<double>(j) +
                                        w.ft * static_cast<double>(t) + w.phase);
          }
          values[at++] = quantize(v);
        }
      }
    }
  }
  FrameFeatureClip clip;
  clip.frames = frames;
  clip.grid = grid;
  clip.channels = channels;
  clip.seed = seed;
  clip.values = Array({frames, grid, grid, channels}, std::move(values));
  return clip;
}

SyntheticSample gen_change_direction(std::size_t grid, std::size_t channels, std::uint64_t seed) {
  check_grid(grid, channels);
  Rng rng(derive_seed(seed, 11, 0));
  const std::vector<double> bg = background(grid, channels, derive_seed(seed, 12, 0));
  Recipe recipe;
  recipe.changed_cell = rng.index(grid * grid);
  const std::vector<double> u = positive_direction(rng, channels);
  recipe.base = quantize(rng.uniform(0.5, 1.5), 0x1.0p-8);
  recipe.step = quantize(rng.uniform(0.5, 1.0), 0x1.0p-8);
  recipe.ramps_up = rng.coin();

  std::vector<double> values = repeat_frames(bg);
  const std::size_t frame_size = grid * grid * channels;
  for (std::size_t t = 0; t < kTaskFrames; ++t) {
    const std::size_t k = recipe.ramps_up ? t : kTaskFrames - 1 - t;
    const double magnitude = recipe.base + recipe.step * static_cast<double>(k);
    double* cell = values.data() + t * frame_size + recipe.changed_cell * channels;
    for (std::size_t d = 0; d < channels; ++d) {
      cell[d] = magnitude * u[d];
    }
  }
  SyntheticSample s;
  s.clip = make_clip(grid, channels, seed, values);
  s.kind = TaskKind::kChangeDirection;
  s.label = recipe.ramps_up ? 1 : 0;
  s.recipe = std::move(recipe);
  return s;
}

SyntheticSample gen_changed_cell(std::size_t grid, std::size_t channels, std::uint64_t seed) {
  check_grid(grid, channels);
  Rng rng(derive_seed(seed, 21, 0));
  const std::vector<double> bg = background(grid, channels, derive_seed(seed, 22, 0));
  Recipe recipe;
  recipe.changed_cell = rng.index(grid * grid);
  const std::vector<double> u = positive_direction(rng, channels);
  recipe.base = quantize(rng.uniform(2.0, 4.0), 0x1.0p-8);

  // palindromic flash: present in the first and last frame only
  constexpr double kProfile[kTaskFrames] = {1.0, 0.0, 0.0, 1.0};
  std::vector<double> values = repeat_frames(bg);
  const std::size_t frame_size = grid * grid * channels;
  for (std::size_t t = 0; t < kTaskFrames; ++t) {
    double* cell = values.data() + t * frame_size + recipe.changed_cell * channels;
    for (std::size_t d = 0; d < channels; ++d) {
      cell[d] += kProfile[t] * recipe.base * u[d];
    }
  }
  SyntheticSample s;
  s.clip = make_clip(grid, channels, seed, values);
  s.kind = TaskKind::kChangedCell;
  s.label = recipe.changed_cell;
  s.recipe = std::move(recipe);
  return s;
}

SyntheticSample gen_caption_regression(std::size_t grid, std::size_t channels, std::uint64_t seed) {
  check_grid(grid, channels);
  constexpr std::size_t kMovers = 3;
  Rng rng(derive_seed(seed, 31, 0));
  const std::vector<double> bg = background(grid, channels, derive_seed(seed, 32, 0));
  Recipe recipe;
  while (recipe.moving_cells.size() < kMovers) {
    const std::size_t cell = rng.index(grid * grid);
    if (std::find(recipe.moving_cells.begin(), recipe.moving_cells.end(), cell) ==
        recipe.moving_cells.end()) {
      recipe.moving_cells.push_back(cell);
    }
  }
  std::vector<double> values = repeat_frames(bg);
  const std::size_t frame_size = grid * grid * channels;
  for (std::size_t cell : recipe.moving_cells) {
    const std::vector<double> u = positive_direction(rng, channels);
    const double slope = quantize(rng.uniform(-1.0, 1.0), 0x1.0p-8);
    recipe.slopes.push_back(slope);
    for (std::size_t t = 0; t < kTaskFrames; ++t) {
      const double offset = (static_cast<double>(t) - 1.5) * slope;
      double* dst = values.data() + t * frame_size + cell * channels;
      for (std::size_t d = 0; d < channels; ++d) {
        dst[d] += offset * u[d];
      }
    }
  }
  SyntheticSample s;
  s.clip = make_clip(grid, channels, seed, values);
  s.kind = TaskKind::kCaptionRegression;
  s.target = caption_target(s.clip);
  s.recipe = std::move(recipe);
  return s;
}

SyntheticSample generate(TaskKind kind, std::size_t grid, std::size_t channels,
                         std::uint64_t seed) {
  switch (kind) {
    case TaskKind::kChangeDirection:
      return gen_change_direction(grid, channels, seed);
    case TaskKind::kChangedCell:
      return gen_changed_cell(grid, channels, seed);
    case TaskKind::kCaptionRegression:
      return gen_caption_regression(grid, channels, seed);
  }
  throw ConfigError("unknown task kind");
}

Array caption_target(const FrameFeatureClip& clip) {
  const std::size_t g = clip.grid;
  const std::size_t half = g / 2;
  const std::size_t d = clip.channels;
  const std::size_t frame_size = g * g * d;
  const auto v = clip.values.values();
  const double* first = v.data();
  const double* last = v.data() + (clip.frames - 1) * frame_size;
  std::vector<double> out(kCaptionTargets, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      const std::size_t quadrant = (i / half) * 2 + j / half;
      const std::size_t base = (i * g + j) * d;
      for (std::size_t c = 0; c < d; ++c) {
        out[quadrant] += last[base + c] - first[base + c];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(half * half);
  for (double& x : out) {
    x *= inv;
  }
  return Array({kCaptionTargets}, std::move(out));
}

FrameFeatureClip reverse_time(const FrameFeatureClip& clip) {
  const std::size_t frame_size = clip.grid * clip.grid * clip.channels;
  const auto v = clip.values.values();
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t t = clip.frames; t-- > 0;) {
    out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(t * frame_size),
               v.begin() + static_cast<std::ptrdiff_t>((t + 1) * frame_size));
  }
  FrameFeatureClip reversed = clip;
  reversed.values = Array(clip.values.shape(), std::move(out));
  return reversed;
}

std::uint64_t sample_seed(std::uint64_t seed, TaskKind kind, std::uint64_t index) {
  return derive_seed(seed, 100 + static_cast<std::uint64_t>(kind), index);
}

std::vector<SyntheticSample> make_corpus(TaskKind kind, std::size_t count, std::size_t grid,
                                         std::size_t channels, std::uint64_t seed) {
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate(kind, grid, channels, sample_seed(seed, kind, i)));
  }
  return out;
}

nlohmann::json to_json(const SyntheticSample& sample) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["task"] = to_string(sample.kind);
  j["seed"] = sample.clip.seed;
  j["shape"] = sample.clip.values.shape();
  j["values"] = std::vector<double>(sample.clip.values.values().begin(),
                                    sample.clip.values.values().end());
  if (sample.kind == TaskKind::kCaptionRegression) {
    j["target"] = std::vector<double>(sample.target.values().begin(), sample.target.values().end());
  } else {
    j["label"] = sample.label;
  }
  return j;
}

SyntheticSample sample_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kFormatVersion) {
    throw InputError("unsupported sample format version " + j.at("version").dump());
  }
  SyntheticSample s;
  s.kind = task_from_string(j.at("task").get<std::string>());
  const auto shape = j.at("shape").get<Shape>();
  if (shape.size() != 4 || shape[1] != shape[2]) {
    throw DimensionError("sample shape must be [T x G x G x D], got " + shape_string(shape));
  }
  s.clip.frames = shape[0];
  s.clip.grid = shape[1];
  s.clip.channels = shape[3];
  s.clip.seed = j.at("seed").get<std::uint64_t>();
  s.clip.values = Array(shape, j.at("values").get<std::vector<double>>());
  if (s.kind == TaskKind::kCaptionRegression) {
    const auto target = j.at("target").get<std::vector<double>>();
    s.target = Array({target.size()}, target);
  } else {
    s.label = j.at("label").get<std::size_t>();
  }
  return s;
}

}  // namespace clapper::synth
