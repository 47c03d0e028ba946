#include "clapper/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "clapper/bench.hpp"
#include "clapper/errors.hpp"

namespace clapper::config {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return "";
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) {
      throw ConfigError("empty list item in '" + key + "'");
    }
    items.push_back(item);
  }
  if (items.empty()) {
    throw ConfigError("'" + key + "' needs at least one value");
  }
  return items;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return value;
}

std::size_t parse_positive(const std::string& key, const std::string& text) {
  const auto value = parse_integer<std::size_t>(key, text);
  if (value == 0) {
    throw ConfigError("'" + key + "' must be positive");
  }
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") {
    return true;
  }
  if (text == "false") {
    return false;
  }
  throw ConfigError("'" + key + "' expects true or false, got '" + text + "'");
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& format) {
  std::string out;
  for (const T& item : items) {
    out += (out.empty() ? "" : ",") + format(item);
  }
  return out;
}

using Setter = std::function<void(Config&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"strategies",
       [](Config& c, const std::string& k, const std::string& v) {
         c.strategies.clear();
         for (const std::string& s : split_list(k, v)) {
           c.strategies.push_back(compress::strategy_from_string(s));
         }
       }},
      {"tasks",
       [](Config& c, const std::string& k, const std::string& v) {
         c.tasks.clear();
         for (const std::string& s : split_list(k, v)) {
           const synth::TaskKind task = synth::task_from_string(s);
           if (task == synth::TaskKind::kCaptionRegression) {
             throw ConfigError("'tasks' lists classification tasks only");
           }
           c.tasks.push_back(task);
         }
       }},
      {"grid", [](Config& c, const std::string& k,
                  const std::string& v) { c.grid = parse_positive(k, v); }},
      {"channels", [](Config& c, const std::string& k,
                      const std::string& v) { c.channels = parse_positive(k, v); }},
      {"frames", [](Config& c, const std::string& k,
                    const std::string& v) { c.frames = parse_positive(k, v); }},
      {"heads", [](Config& c, const std::string& k,
                   const std::string& v) { c.heads = parse_positive(k, v); }},
      {"depth", [](Config& c, const std::string& k,
                   const std::string& v) { c.depth = parse_positive(k, v); }},
      {"ffn_mult", [](Config& c, const std::string& k,
                      const std::string& v) { c.ffn_mult = parse_positive(k, v); }},
      {"temporal_position", [](Config& c, const std::string& k,
                               const std::string& v) { c.temporal_position = parse_bool(k, v); }},
      {"seeds",
       [](Config& c, const std::string& k, const std::string& v) {
         c.seeds.clear();
         for (const std::string& s : split_list(k, v)) {
           c.seeds.push_back(parse_integer<std::uint64_t>(k, s));
         }
       }},
      {"budgets",
       [](Config& c, const std::string& k, const std::string& v) {
         c.budgets.clear();
         for (const std::string& s : split_list(k, v)) {
           c.budgets.push_back(parse_positive(k, s));
         }
       }},
      {"table_frames",
       [](Config& c, const std::string& k, const std::string& v) {
         c.table_frames.clear();
         for (const std::string& s : split_list(k, v)) {
           c.table_frames.push_back(parse_positive(k, s));
         }
       }},
      {"stage1_samples", [](Config& c, const std::string& k,
                            const std::string& v) { c.stage1_samples = parse_positive(k, v); }},
      {"stage1_epochs", [](Config& c, const std::string& k,
                           const std::string& v) { c.stage1_epochs = parse_positive(k, v); }},
      {"stage1_batch", [](Config& c, const std::string& k,
                          const std::string& v) { c.stage1_batch = parse_positive(k, v); }},
      {"stage2_samples", [](Config& c, const std::string& k,
                            const std::string& v) { c.stage2_samples = parse_positive(k, v); }},
      {"stage2_epochs", [](Config& c, const std::string& k,
                           const std::string& v) { c.stage2_epochs = parse_positive(k, v); }},
      {"stage2_batch", [](Config& c, const std::string& k,
                          const std::string& v) { c.stage2_batch = parse_positive(k, v); }},
      {"test_samples", [](Config& c, const std::string& k,
                          const std::string& v) { c.test_samples = parse_positive(k, v); }},
      {"learning_rate",
       [](Config& c, const std::string& k, const std::string& v) {
         c.learning_rate = parse_double(k, v);
         if (!(c.learning_rate >= 0.0)) {
           throw ConfigError("'learning_rate' must be non-negative");
         }
       }},
      {"warmup", [](Config& c, const std::string& k,
                    const std::string& v) { c.warmup = parse_bool(k, v); }},
      {"threads", [](Config& c, const std::string& k,
                     const std::string& v) { c.threads = parse_positive(k, v); }},
      {"gradcheck_tolerance",
       [](Config& c, const std::string& k, const std::string& v) {
         c.gradcheck_tolerance = parse_double(k, v);
         if (!(c.gradcheck_tolerance > 0.0)) {
           throw ConfigError("'gradcheck_tolerance' must be positive");
         }
       }},
      {"out_dir",
       [](Config& c, const std::string& k, const std::string& v) {
         if (v.empty()) {
           throw ConfigError("'" + k + "' must not be empty");
         }
         c.out_dir = v;
       }},
  };
  return table;
}

void validate(const Config& c) {
  if (c.grid % 4 != 0) {
    throw ConfigError("'grid' must be divisible by 4, got " + std::to_string(c.grid));
  }
  if (c.channels % c.heads != 0) {
    throw ConfigError("'channels' must be divisible by 'heads'");
  }
  std::set<compress::Strategy> seen(c.strategies.begin(), c.strategies.end());
  if (seen.size() != c.strategies.size()) {
    throw ConfigError("'strategies' lists a strategy twice");
  }
}

}  // namespace

compress::CompressorSpec Config::spec(compress::Strategy strategy) const {
  compress::CompressorSpec s;
  s.strategy = strategy;
  s.heads = heads;
  s.depth = depth;
  s.ffn_mult = ffn_mult;
  s.temporal_position = temporal_position;
  return s;
}

compress::ModelDims Config::dims() const { return {grid, channels, 4}; }

Config parse_config(std::istream& in) {
  Config c;
  std::set<std::string> given;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      std::string valid;
      for (const auto& [name, setter] : setters()) {
        valid += (valid.empty() ? "" : ", ") + name;
      }
      throw ConfigError("line " + std::to_string(number) + ": unknown key '" + key +
                        "' (valid: " + valid + ")");
    }
    if (!given.insert(key).second) {
      throw ConfigError("line " + std::to_string(number) + ": key '" + key + "' given twice");
    }
    it->second(c, key, value);
  }
  validate(c);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  return parse_config(in);
}

std::string to_text(const Config& c) {
  const auto num = [](auto v) { return std::to_string(v); };
  const auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  std::string out;
  const auto put = [&out](const std::string& key, const std::string& value) {
    out += key + " = " + value + "\n";
  };
  put("strategies",
      join(c.strategies, [](compress::Strategy s) { return compress::to_string(s); }));
  put("tasks", join(c.tasks, [](synth::TaskKind t) { return synth::to_string(t); }));
  put("grid", num(c.grid));
  put("channels", num(c.channels));
  put("frames", num(c.frames));
  put("heads", num(c.heads));
  put("depth", num(c.depth));
  put("ffn_mult", num(c.ffn_mult));
  put("temporal_position", flag(c.temporal_position));
  put("seeds", join(c.seeds, num));
  put("budgets", join(c.budgets, num));
  put("table_frames", join(c.table_frames, num));
  put("stage1_samples", num(c.stage1_samples));
  put("stage1_epochs", num(c.stage1_epochs));
  put("stage1_batch", num(c.stage1_batch));
  put("stage2_samples", num(c.stage2_samples));
  put("stage2_epochs", num(c.stage2_epochs));
  put("stage2_batch", num(c.stage2_batch));
  put("test_samples", num(c.test_samples));
  put("learning_rate", bench::format_number(c.learning_rate));
  put("warmup", flag(c.warmup));
  put("threads", num(c.threads));
  put("gradcheck_tolerance", bench::format_number(c.gradcheck_tolerance));
  return out;
}

void rebase_seeds(Config& config, std::uint64_t base) {
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    config.seeds[i] = base + i;
  }
}

}  // namespace clapper::config
