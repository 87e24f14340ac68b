#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlgps/agent.hpp"
#include "rlgps/env.hpp"
#include "rlgps/kernel.hpp"

namespace rlgps {

/// Flat `section.key = value` text. Blank lines and lines starting with '#'
/// or ';' are ignored; `[section]` headers prefix the keys that follow.
class IniFile {
 public:
  static IniFile parse(std::istream& in, const std::string& source = "<config>");
  static IniFile load(const std::string& path);

  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::optional<std::string> get(const std::string& key) const;
  /// Line number of `key` in the source, 0 if it was set programmatically.
  int line_of(const std::string& key) const;
  const std::string& source() const { return source_; }
  void set(const std::string& key, const std::string& value);

 private:
  std::string source_;
  std::map<std::string, std::string> entries_;
  std::map<std::string, int> lines_;
};

enum class EnvKind { GpSampled, Navigation, Maze };

EnvKind parse_env_kind(const std::string& s);
std::string to_string(EnvKind kind);

struct ExperimentConfig {
  std::string name = "experiment";
  std::string output_dir = "results";

  EnvKind env = EnvKind::GpSampled;
  GridSpec grid{2, 1, 10, false};
  Vector goal = Vector::Constant(2, 0.9);
  std::string maze_file;  // empty: built-in S corridor

  ScalarKernelSpec base;
  bool lmc = true;
  std::string mixing = "auto";  // "auto", "identity", "random:<seed>" or row-major list

  Index episodes = 200;
  Index horizon = 10;
  Index trials = 20;
  std::uint64_t seed = 0;
  double noise = 0.1;
  double delta = 0.1;
  double beta_scale = 1.0;
  std::optional<double> u_g;  // unset: estimated from V* per trial
  std::optional<double> u_h;
  std::string sampling = "auto";  // "exact", "nystrom" or "auto" (nystrom above the exact capacity)
  Index inducing = 100;
  bool timing = false;
  Index workers = 1;

  // Verification settings.
  Index verify_sequences = 500;
  Index verify_trials = 500;

  /// Canonical key/value listing of every setting, sorted by key.
  std::map<std::string, std::string> canonical() const;
  /// FNV-1a hash of the canonical listing, as 16 hex digits.
  std::string hash() const;

  LmcKernel kernel(Index outputs) const;
  Index outputs() const { return 1 + grid.state_dims; }
  /// The environment of one trial (navigation and maze ignore the seed).
  TabularMdp make_env(std::uint64_t env_seed) const;
  /// Agent settings for one trial, with u_G and u_H resolved against `mdp`.
  RunConfig run_config(const TabularMdp& mdp, std::uint64_t agent_seed) const;

  void validate() const;
};

/// All keys accepted in config files and sweeps.
const std::vector<std::string>& config_keys();

/// Applies one `key = value` setting. Throws ConfigError on unknown keys or
/// malformed values, citing `line` when it is positive.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value, int line = 0,
                   const std::string& source = "");

ExperimentConfig load_experiment(const IniFile& ini);
ExperimentConfig load_experiment(const std::string& path);

/// Seeds of trial `index`: the environment seed is base + index (shared across
/// sweep cells), the agent seed is a scrambled function of it.
std::uint64_t env_seed(const ExperimentConfig& cfg, Index trial);
std::uint64_t agent_seed(const ExperimentConfig& cfg, Index trial);

}  // namespace rlgps
