#include "clapper/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "clapper/errors.hpp"

namespace clapper::compress {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[4] = {'C', 'L', 'P', 'K'};
constexpr std::uint32_t kVersion = 1;
// guards against absurd allocations from a corrupt file
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw InputError("checkpoint truncated");
  }
  return value;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) {
    throw InputError("checkpoint string too long");
  }
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) {
    throw InputError("checkpoint truncated");
  }
  return s;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(std::stoull(v)); }

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
  const std::map<std::string, std::string> meta = {
      {"strategy", to_string(params.spec.strategy)},
      {"queries", std::to_string(params.spec.queries)},
      {"heads", std::to_string(params.spec.heads)},
      {"temporal_position", params.spec.temporal_position ? "1" : "0"},
      {"depth", std::to_string(params.spec.depth)},
      {"ffn_mult", std::to_string(params.spec.ffn_mult)},
      {"grid", std::to_string(params.dims.grid)},
      {"channels", std::to_string(params.dims.channels)},
      {"max_frames", std::to_string(params.dims.max_frames)},
      {"stage", std::to_string(params.stage)},
  };
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.arrays.size()));
  for (const auto& [name, a] : params.arrays) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.rank()));
    for (std::size_t d : a.shape()) {
      put<std::uint64_t>(out, d);
    }
    out.write(reinterpret_cast<const char*>(a.values().data()),
              static_cast<std::streamsize>(a.size() * sizeof(double)));
  }
  if (!out) {
    throw std::runtime_error("failed to write checkpoint");
  }
}

ModelParams read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw InputError("not a checkpoint file");
  }
  if (const auto version = get<std::uint32_t>(in); version != kVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  std::map<std::string, std::string> meta;
  for (auto n = get<std::uint32_t>(in); n > 0; --n) {
    std::string key = get_string(in);
    meta[key] = get_string(in);
  }
  const auto field = [&](const char* key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw InputError(std::string("checkpoint lacks metadata '") + key + "'");
    }
    return it->second;
  };
  ModelParams p;
  p.spec.strategy = strategy_from_string(field("strategy"));
  p.spec.queries = to_size(field("queries"));
  p.spec.heads = to_size(field("heads"));
  p.spec.temporal_position = field("temporal_position") == "1";
  p.spec.depth = to_size(field("depth"));
  p.spec.ffn_mult = to_size(field("ffn_mult"));
  p.dims.grid = to_size(field("grid"));
  p.dims.channels = to_size(field("channels"));
  p.dims.max_frames = to_size(field("max_frames"));
  p.stage = std::stoi(field("stage"));
  for (auto n = get<std::uint32_t>(in); n > 0; --n) {
    std::string name = get_string(in);
    const auto rank = get<std::uint32_t>(in);
    if (rank > 8) {
      throw InputError("checkpoint array '" + name + "' has implausible rank");
    }
    Shape shape(rank);
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get<std::uint64_t>(in));
    }
    if (shape_size(shape) > kMaxElements) {
      throw InputError("checkpoint array '" + name + "' is too large");
    }
    std::vector<double> values(shape_size(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw InputError("checkpoint truncated");
    }
    p.arrays.emplace(std::move(name), Array(std::move(shape), std::move(values)));
  }
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot open " + path.string() + " for writing");
  }
  write_checkpoint(out, params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  return read_checkpoint(in);
}

}  // namespace clapper::compress
