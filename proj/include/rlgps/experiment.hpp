#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rlgps/agent.hpp"
#include "rlgps/config.hpp"

namespace rlgps {

inline constexpr const char* kTraceHeader =
    "trial,episode,start_cell,v_star,return,inst_regret,cum_regret,info_gain,xi_sum,wall_ms";

/// One CSV row per episode, doubles in shortest round-trip form.
void write_trace_csv(std::ostream& out, Index trial, const RegretTrace& trace);
void write_trace_csv(const std::filesystem::path& path, Index trial, const RegretTrace& trace);

struct TraceFile {
  Index trial = 0;
  RegretTrace trace;
};

/// Throws ParseError with the 1-based line number of the offending row.
TraceFile read_trace_csv(std::istream& in);
TraceFile read_trace_csv(const std::filesystem::path& path);

struct TrialOutcome {
  Index trial = 0;
  std::filesystem::path csv;
  double wall_seconds = 0.0;
  RegretTrace trace;
};

struct GroupOutcome {
  std::string group;  // empty for plain runs
  std::filesystem::path dir;
  std::vector<TrialOutcome> trials;
};

/// Worker count: min(config workers, GPRLGPS_WORKERS if set), at least 1.
Index resolve_workers(const ExperimentConfig& cfg);

/// Runs every trial of `cfg` into `dir` (created if missing): one CSV per
/// trial plus manifest.json. Trials run concurrently on `workers` threads.
GroupOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir, const std::string& group = "");

/// Runs the trials without touching the file system.
std::vector<TrialOutcome> run_trials(const ExperimentConfig& cfg);

/// One `key=v1,v2,...` sweep axis.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

SweepAxis parse_sweep_axis(const std::string& spec);

/// Cross product of the axes over `base`. Each cell keeps the base seed so
/// trial i faces the same environment seed in every cell.
std::vector<std::pair<std::string, ExperimentConfig>> expand_sweep(const ExperimentConfig& base,
                                                                  const std::vector<SweepAxis>& axes);

std::vector<GroupOutcome> run_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& axes);

/// Per-episode statistics of cumulative regret across trials.
struct AggregateResult {
  std::string group;
  std::vector<Index> episode;
  std::vector<double> mean;
  std::vector<double> sem;  // sample std / sqrt(trials), 0 for one trial
  std::vector<double> median;
  Index trials = 0;
};

/// Aggregates over the episodes present in every trace.
AggregateResult aggregate(const std::string& group, const std::vector<RegretTrace>& traces);

/// Log-log least-squares slope of the mean cumulative regret over episodes
/// [first, last] (1-based, inclusive).
double loglog_slope(const AggregateResult& agg, Index first, Index last);

/// Mean cumulative regret at episode `k` (1-based).
double mean_at(const AggregateResult& agg, Index k);
double sem_at(const AggregateResult& agg, Index k);

std::string code_version();

}  // namespace rlgps
