#include "rlgps/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlgps/text.hpp"

namespace rlgps {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected, int line,
                            const std::string& source) {
  std::string where = source.empty() ? "" : source + ":";
  if (line > 0) where += std::to_string(line) + ": ";
  else if (!where.empty()) where += " ";
  throw ConfigError(where + "invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_doubles(const Vector& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += format_double(v(i));
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// IniFile

IniFile IniFile::parse(std::istream& in, const std::string& source) {
  IniFile ini;
  ini.source_ = source;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(source + ":" + std::to_string(line) + ": unterminated section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line) + ": expected 'key = value', got '" + text + "'");
    }
    std::string key = trim(std::string_view(text).substr(0, eq));
    std::string value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    if (ini.entries_.count(key)) {
      throw ConfigError(source + ":" + std::to_string(line) + ": duplicate key " + key + " (first set on line " +
                        std::to_string(ini.lines_[key]) + ")");
    }
    ini.entries_[key] = value;
    ini.lines_[key] = line;
  }
  return ini;
}

IniFile IniFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse(in, path);
}

std::optional<std::string> IniFile::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

int IniFile::line_of(const std::string& key) const {
  const auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

void IniFile::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
  lines_.erase(key);
}

// ---------------------------------------------------------------------------
// ExperimentConfig

EnvKind parse_env_kind(const std::string& s) {
  if (s == "gp_sampled") return EnvKind::GpSampled;
  if (s == "navigation") return EnvKind::Navigation;
  if (s == "maze") return EnvKind::Maze;
  throw ConfigError("unknown environment type '" + s + "' (expected gp_sampled, navigation or maze)");
}

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::GpSampled: return "gp_sampled";
    case EnvKind::Navigation: return "navigation";
    case EnvKind::Maze: return "maze";
  }
  return "?";
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "experiment.name", "output.dir",       "env.type",       "env.bins",        "env.state_dims",
      "env.action_dims", "env.goal",         "env.maze_file",  "kernel.family",   "kernel.lengthscale",
      "kernel.variance", "kernel.lmc",       "kernel.mixing",  "run.episodes",    "run.horizon",
      "run.trials",      "run.seed",         "run.noise",      "run.delta",       "run.beta_scale",
      "run.u_g",         "run.u_h",          "run.sampling",   "run.inducing",    "run.timing",
      "run.workers",     "verify.sequences", "verify.trials",
  };
  return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value, int line,
                   const std::string& source) {
  auto as_index = [&](Index lo) {
    Index v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || v < lo) {
      bad_value(key, value, "an integer >= " + std::to_string(lo), line, source);
    }
    return v;
  };
  auto as_seed = [&] {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a seed", line, source);
    return v;
  };
  auto as_double = [&] {
    const std::optional<double> v = parse_double(value);
    if (!v) bad_value(key, value, "a number", line, source);
    return *v;
  };
  auto as_bool = [&] {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_value(key, value, "true or false", line, source);
  };
  auto as_optional = [&]() -> std::optional<double> {
    if (value == "auto") return std::nullopt;
    return as_double();
  };

  if (key == "experiment.name") {
    if (value.empty() || value.find('/') != std::string::npos) bad_value(key, value, "a plain name", line, source);
    cfg.name = value;
  } else if (key == "output.dir") {
    cfg.output_dir = value;
  } else if (key == "env.type") {
    try {
      cfg.env = parse_env_kind(value);
    } catch (const ConfigError&) {
      bad_value(key, value, "gp_sampled, navigation or maze", line, source);
    }
  } else if (key == "env.bins") {
    cfg.grid.bins = as_index(2);
  } else if (key == "env.state_dims") {
    cfg.grid.state_dims = as_index(0);
  } else if (key == "env.action_dims") {
    cfg.grid.action_dims = as_index(1);
  } else if (key == "env.goal") {
    const auto parts = split_list(value);
    Vector goal(Index(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto v = parse_double(parts[i]);
      if (!v) bad_value(key, value, "a comma-separated point", line, source);
      goal(Index(i)) = *v;
    }
    cfg.goal = goal;
  } else if (key == "env.maze_file") {
    cfg.maze_file = value;
  } else if (key == "kernel.family") {
    try {
      cfg.base.family = parse_kernel_family(value);
    } catch (const ConfigError&) {
      bad_value(key, value, "rbf, matern15 or matern25", line, source);
    }
  } else if (key == "kernel.lengthscale") {
    cfg.base.lengthscale = as_double();
  } else if (key == "kernel.variance") {
    cfg.base.variance = as_double();
  } else if (key == "kernel.lmc") {
    cfg.lmc = as_bool();
  } else if (key == "kernel.mixing") {
    cfg.mixing = value;
  } else if (key == "run.episodes") {
    cfg.episodes = as_index(1);
  } else if (key == "run.horizon") {
    cfg.horizon = as_index(1);
  } else if (key == "run.trials") {
    cfg.trials = as_index(1);
  } else if (key == "run.seed") {
    cfg.seed = as_seed();
  } else if (key == "run.noise") {
    cfg.noise = as_double();
  } else if (key == "run.delta") {
    cfg.delta = as_double();
  } else if (key == "run.beta_scale") {
    cfg.beta_scale = as_double();
  } else if (key == "run.u_g") {
    cfg.u_g = as_optional();
  } else if (key == "run.u_h") {
    cfg.u_h = as_optional();
  } else if (key == "run.sampling") {
    if (value != "exact" && value != "nystrom" && value != "auto") {
      bad_value(key, value, "exact, nystrom or auto", line, source);
    }
    cfg.sampling = value;
  } else if (key == "run.inducing") {
    cfg.inducing = as_index(1);
  } else if (key == "run.timing") {
    cfg.timing = as_bool();
  } else if (key == "run.workers") {
    cfg.workers = as_index(1);
  } else if (key == "verify.sequences") {
    cfg.verify_sequences = as_index(1);
  } else if (key == "verify.trials") {
    cfg.verify_trials = as_index(1);
  } else {
    std::string where = source.empty() ? "" : source + ":";
    if (line > 0) where += std::to_string(line) + ": ";
    else if (!where.empty()) where += " ";
    throw ConfigError(where + "unknown config key '" + key + "'");
  }
}

ExperimentConfig load_experiment(const IniFile& ini) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : ini.entries()) apply_setting(cfg, key, value, ini.line_of(key), ini.source());
  if (!cfg.maze_file.empty() && std::filesystem::path(cfg.maze_file).is_relative() && !ini.source().empty() &&
      ini.source() != "<config>") {
    const auto dir = std::filesystem::path(ini.source()).parent_path();
    cfg.maze_file = (dir / cfg.maze_file).lexically_normal().string();
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) { return load_experiment(IniFile::load(path)); }

std::map<std::string, std::string> ExperimentConfig::canonical() const {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("auto"); };
  std::map<std::string, std::string> m;
  m["experiment.name"] = name;
  m["output.dir"] = output_dir;
  m["env.type"] = to_string(env);
  m["env.bins"] = std::to_string(grid.bins);
  m["env.state_dims"] = std::to_string(grid.state_dims);
  m["env.action_dims"] = std::to_string(grid.action_dims);
  m["env.goal"] = join_doubles(goal);
  m["env.maze_file"] = maze_file;
  m["kernel.family"] = to_string(base.family);
  m["kernel.lengthscale"] = format_double(base.lengthscale);
  m["kernel.variance"] = format_double(base.variance);
  m["kernel.lmc"] = lmc ? "true" : "false";
  m["kernel.mixing"] = mixing;
  m["run.episodes"] = std::to_string(episodes);
  m["run.horizon"] = std::to_string(horizon);
  m["run.trials"] = std::to_string(trials);
  m["run.seed"] = std::to_string(seed);
  m["run.noise"] = format_double(noise);
  m["run.delta"] = format_double(delta);
  m["run.beta_scale"] = format_double(beta_scale);
  m["run.u_g"] = opt(u_g);
  m["run.u_h"] = opt(u_h);
  m["run.sampling"] = sampling;
  m["run.inducing"] = std::to_string(inducing);
  m["run.timing"] = timing ? "true" : "false";
  m["run.workers"] = std::to_string(workers);
  m["verify.sequences"] = std::to_string(verify_sequences);
  m["verify.trials"] = std::to_string(verify_trials);
  return m;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [key, value] : canonical()) {
    if (key == "run.workers") continue;  // does not affect results
    for (const char c : key + "=" + value + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LmcKernel ExperimentConfig::kernel(Index d) const {
  if (!lmc) return LmcKernel::independent(base, d);
  if (mixing == "identity") return LmcKernel::lmc(base, MixingMatrix::identity(d));
  if (mixing == "auto") {
    if (d == 3) return LmcKernel::lmc(base, MixingMatrix(default_mixing_weights()));
    return LmcKernel::lmc(base, MixingMatrix::identity(d));
  }
  if (mixing.rfind("random:", 0) == 0) {
    const std::string tail = mixing.substr(7);
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), seed);
    if (ec != std::errc() || ptr != tail.data() + tail.size()) {
      throw ConfigError("kernel.mixing: bad seed in '" + mixing + "'");
    }
    return LmcKernel::lmc(base, MixingMatrix::random(d, d, seed));
  }
  const auto parts = split_list(mixing);
  if (Index(parts.size()) % d != 0 || parts.empty()) {
    throw ConfigError("kernel.mixing: " + std::to_string(parts.size()) + " entries do not form a matrix with " +
                      std::to_string(d) + " rows");
  }
  const Index cols = Index(parts.size()) / d;
  Matrix w(d, cols);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < cols; ++j) {
      const auto v = parse_double(parts[std::size_t(i * cols + j)]);
      if (!v) throw ConfigError("kernel.mixing: '" + parts[std::size_t(i * cols + j)] + "' is not a number");
      w(i, j) = *v;
    }
  return LmcKernel::lmc(base, MixingMatrix(w));
}

TabularMdp ExperimentConfig::make_env(std::uint64_t env_seed) const {
  switch (env) {
    case EnvKind::GpSampled:
      return make_gp_sampled_env(kernel(outputs()), env_seed, grid, horizon);
    case EnvKind::Navigation:
      return make_navigation_env(grid, goal, horizon);
    case EnvKind::Maze: {
      const MazeLayout layout = maze_file.empty() ? MazeLayout::s_corridor(grid.bins) : MazeLayout::load(maze_file);
      return make_maze_env(layout, grid, horizon);
    }
  }
  throw ConfigError("unknown environment type");
}

RunConfig ExperimentConfig::run_config(const TabularMdp& mdp, std::uint64_t seed_value) const {
  RunConfig run;
  run.episodes = episodes;
  run.horizon = horizon;
  run.kernel = kernel(mdp.output_dim());
  run.noise = noise;
  run.seed = seed_value;
  run.timing = timing;
  run.confidence.delta = delta;
  run.confidence.beta_scale = beta_scale;
  if (!u_g || !u_h) {
    const SmoothnessBounds est = estimate_smoothness(mdp, optimal_values(mdp));
    run.confidence.grad_bound = u_g.value_or(est.grad);
    run.confidence.hess_bound = u_h.value_or(est.hess);
  } else {
    run.confidence.grad_bound = *u_g;
    run.confidence.hess_bound = *u_h;
  }
  run.sampling.inducing = inducing;
  if (sampling == "nystrom") {
    run.sampling.mode = SamplingMode::Nystrom;
  } else if (sampling == "auto") {
    const Index cells = mdp.num_states() * mdp.num_actions();
    run.sampling.mode = cells * mdp.output_dim() > kExactSamplingCapacity ? SamplingMode::Nystrom : SamplingMode::Exact;
  }
  run.validate();
  return run;
}

void ExperimentConfig::validate() const {
  grid.validate();
  base.validate();
  if (trials < 1) throw ConfigError("run.trials must be at least 1");
  if (grid.bins < 2) throw ConfigError("env.bins must be at least 2");
  if (!(noise > 0.0)) throw ConfigError("run.noise must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("run.delta must lie in (0, 1)");
  if (!(beta_scale >= 0.0)) throw ConfigError("run.beta_scale must be nonnegative");
  if ((u_g && *u_g < 0.0) || (u_h && *u_h < 0.0)) throw ConfigError("run.u_g and run.u_h must be nonnegative");
  if (env != EnvKind::GpSampled && grid.state_dims != 2) {
    throw ConfigError("navigation and maze environments need env.state_dims = 2");
  }
  if (env == EnvKind::Navigation && goal.size() != 2) throw ConfigError("env.goal needs two coordinates");
  if (env == EnvKind::Maze && !maze_file.empty() && !std::filesystem::exists(maze_file)) {
    throw ConfigError("env.maze_file not found: " + maze_file);
  }
  (void)kernel(outputs());
}

std::uint64_t env_seed(const ExperimentConfig& cfg, Index trial) { return cfg.seed + static_cast<std::uint64_t>(trial); }

std::uint64_t agent_seed(const ExperimentConfig& cfg, Index trial) { return splitmix64(env_seed(cfg, trial)); }

}  // namespace rlgps
