#include "rlgps/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rlgps/text.hpp"

namespace rlgps {

namespace fs = std::filesystem;

std::string code_version() { return RLGPS_VERSION; }

// ---------------------------------------------------------------------------
// CSV

void write_trace_csv(std::ostream& out, Index trial, const RegretTrace& trace) {
  out << kTraceHeader << '\n';
  for (const EpisodeRecord& e : trace.episodes) {
    out << trial << ',' << e.episode << ',' << e.start_cell << ',' << format_double(e.v_star) << ','
        << format_double(e.achieved) << ',' << format_double(e.inst_regret) << ',' << format_double(e.cum_regret)
        << ',' << format_double(e.info_gain) << ',' << format_double(e.xi_sum) << ',' << format_double(e.wall_ms)
        << '\n';
  }
}

void write_trace_csv(const fs::path& path, Index trial, const RegretTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_trace_csv(out, trial, trace);
  if (!out) throw IoError("write failed for " + path.string());
}

TraceFile read_trace_csv(std::istream& in) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw ParseError("empty trace file", row);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError("unexpected trace header '" + line + "'", row);

  TraceFile out;
  bool first = true;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 10) {
      throw ParseError("expected 10 fields, got " + std::to_string(fields.size()), row);
    }
    auto integer = [&](std::string_view f, const char* name) {
      Index v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(std::string("bad ") + name + " '" + std::string(f) + "'", row);
      }
      return v;
    };
    auto real = [&](std::string_view f, const char* name) {
      const auto v = parse_double(f);
      if (!v) throw ParseError(std::string("bad ") + name + " '" + std::string(f) + "'", row);
      return *v;
    };
    const Index trial = integer(fields[0], "trial");
    if (first) {
      out.trial = trial;
      first = false;
    } else if (trial != out.trial) {
      throw ParseError("trial index changes within one file", row);
    }
    EpisodeRecord e;
    e.episode = integer(fields[1], "episode");
    e.start_cell = integer(fields[2], "start_cell");
    e.v_star = real(fields[3], "v_star");
    e.achieved = real(fields[4], "return");
    e.inst_regret = real(fields[5], "inst_regret");
    e.cum_regret = real(fields[6], "cum_regret");
    e.info_gain = real(fields[7], "info_gain");
    e.xi_sum = real(fields[8], "xi_sum");
    e.wall_ms = real(fields[9], "wall_ms");
    out.trace.episodes.push_back(e);
  }
  return out;
}

TraceFile read_trace_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_trace_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

// ---------------------------------------------------------------------------
// Running

Index resolve_workers(const ExperimentConfig& cfg) {
  Index workers = cfg.workers;
  if (const char* env = std::getenv("GPRLGPS_WORKERS")) {
    Index cap = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec == std::errc() && ptr == s.data() + s.size() && cap >= 1) workers = std::min(workers, cap);
  }
  return std::max<Index>(1, workers);
}

namespace {

/// Runs `task(i)` for i in [0, count) on `workers` threads; rethrows the first
/// failure after all threads join.
template <typename Task>
void parallel_for(Index count, Index workers, Task task) {
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const Index i = next.fetch_add(1);
      if (i >= count) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  const Index threads = std::min(workers, count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (Index t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

TrialOutcome run_one(const ExperimentConfig& cfg, Index trial) {
  const auto t0 = std::chrono::steady_clock::now();
  const TabularMdp mdp = cfg.make_env(env_seed(cfg, trial));
  const RunConfig run_cfg = cfg.run_config(mdp, agent_seed(cfg, trial));
  TrialOutcome out;
  out.trial = trial;
  out.trace = run(run_cfg, mdp).trace;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::string trial_file_name(Index trial) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%03lld.csv", static_cast<long long>(trial));
  return buf;
}

}  // namespace

std::vector<TrialOutcome> run_trials(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrialOutcome> out(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, resolve_workers(cfg), [&](Index i) { out[std::size_t(i)] = run_one(cfg, i); });
  return out;
}

GroupOutcome run_experiment(const ExperimentConfig& cfg, const fs::path& dir, const std::string& group) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  const auto t0 = std::chrono::steady_clock::now();
  GroupOutcome result;
  result.group = group;
  result.dir = dir;
  result.trials.resize(std::size_t(cfg.trials));
  parallel_for(cfg.trials, resolve_workers(cfg), [&](Index i) {
    TrialOutcome t = run_one(cfg, i);
    t.csv = dir / trial_file_name(i);
    write_trace_csv(t.csv, i, t.trace);
    result.trials[std::size_t(i)] = std::move(t);
  });
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::ordered_json manifest;
  manifest["name"] = cfg.name;
  manifest["group"] = group;
  manifest["config_hash"] = cfg.hash();
  manifest["code_version"] = code_version();
  manifest["config"] = cfg.canonical();
  manifest["total_wall_seconds"] = total;
  auto& trials = manifest["trials"] = nlohmann::ordered_json::array();
  for (const TrialOutcome& t : result.trials) {
    trials.push_back({{"trial", t.trial},
                      {"csv", t.csv.filename().string()},
                      {"env_seed", env_seed(cfg, t.trial)},
                      {"agent_seed", agent_seed(cfg, t.trial)},
                      {"final_cum_regret", t.trace.cumulative()},
                      {"wall_seconds", t.wall_seconds}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
  return result;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepAxis parse_sweep_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("sweep axis must look like key=v1,v2: '" + spec + "'");
  SweepAxis axis;
  axis.key = spec.substr(0, eq);
  // Values are split on ';' when present so list-valued keys can be swept.
  const std::string rest = spec.substr(eq + 1);
  const char sep = rest.find(';') != std::string::npos ? ';' : ',';
  std::string item;
  std::istringstream in(rest);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) axis.values.push_back(item);
  }
  if (axis.values.empty()) throw ConfigError("sweep axis " + axis.key + " has no values");
  const auto& keys = config_keys();
  if (std::find(keys.begin(), keys.end(), axis.key) == keys.end()) {
    throw ConfigError("unknown sweep key '" + axis.key + "'");
  }
  return axis;
}

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (const char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

}  // namespace

std::vector<std::pair<std::string, ExperimentConfig>> expand_sweep(const ExperimentConfig& base,
                                                                  const std::vector<SweepAxis>& axes) {
  if (axes.empty()) throw ConfigError("sweep needs at least one axis");
  std::vector<std::pair<std::string, ExperimentConfig>> cells{{"", base}};
  for (const SweepAxis& axis : axes) {
    if (axis.values.empty()) throw ConfigError("sweep axis " + axis.key + " has no values");
    const std::string short_key = axis.key.substr(axis.key.find('.') + 1);
    std::vector<std::pair<std::string, ExperimentConfig>> next;
    for (const auto& [name, cfg] : cells) {
      for (const std::string& value : axis.values) {
        ExperimentConfig c = cfg;
        apply_setting(c, axis.key, value);
        c.validate();
        next.emplace_back((name.empty() ? "" : name + "_") + short_key + "-" + sanitize(value), std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

std::vector<GroupOutcome> run_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& axes) {
  std::vector<GroupOutcome> out;
  for (const auto& [group, cfg] : expand_sweep(base, axes)) {
    out.push_back(run_experiment(cfg, fs::path(base.output_dir) / base.name / group, group));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

AggregateResult aggregate(const std::string& group, const std::vector<RegretTrace>& traces) {
  AggregateResult out;
  out.group = group;
  out.trials = Index(traces.size());
  if (traces.empty()) return out;
  std::size_t episodes = traces.front().episodes.size();
  for (const RegretTrace& t : traces) episodes = std::min(episodes, t.episodes.size());

  const double n = static_cast<double>(traces.size());
  std::vector<double> column(traces.size());
  for (std::size_t k = 0; k < episodes; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      column[i] = traces[i].episodes[k].cum_regret;
      sum += column[i];
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const double v : column) ss += (v - mean) * (v - mean);
    const double sem = traces.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    std::sort(column.begin(), column.end());
    const std::size_t mid = column.size() / 2;
    const double median = column.size() % 2 ? column[mid] : 0.5 * (column[mid - 1] + column[mid]);
    out.episode.push_back(traces.front().episodes[k].episode);
    out.mean.push_back(mean);
    out.sem.push_back(sem);
    out.median.push_back(median);
  }
  return out;
}

double mean_at(const AggregateResult& agg, Index k) {
  if (k < 1 || k > Index(agg.mean.size())) throw InputError("mean_at: episode out of range");
  return agg.mean[std::size_t(k - 1)];
}

double sem_at(const AggregateResult& agg, Index k) {
  if (k < 1 || k > Index(agg.sem.size())) throw InputError("sem_at: episode out of range");
  return agg.sem[std::size_t(k - 1)];
}

double loglog_slope(const AggregateResult& agg, Index first, Index last) {
  if (first < 1 || last > Index(agg.mean.size()) || last - first < 1) {
    throw InputError("loglog_slope: episode range out of bounds");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  Index n = 0;
  for (Index k = first; k <= last; ++k) {
    const double y = agg.mean[std::size_t(k - 1)];
    if (!(y > 0.0)) continue;
    const double x = std::log(static_cast<double>(k));
    const double ly = std::log(y);
    sx += x;
    sy += ly;
    sxx += x * x;
    sxy += x * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
}

}  // namespace rlgps
