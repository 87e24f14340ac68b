#pragma once

#include <cstdint>
#include <vector>

#include "rlgps/confidence.hpp"
#include "rlgps/env.hpp"
#include "rlgps/gp.hpp"
#include "rlgps/planner.hpp"

namespace rlgps {

enum class Policy {
  PosteriorSampling,  // plan on one posterior draw per episode
  Oracle,             // plan on the true MDP (zero-regret reference)
};

struct RunConfig {
  Index episodes = 200;
  Index horizon = 10;
  LmcKernel kernel = LmcKernel::independent({}, 3);
  double noise = 0.1;
  SamplingSpec sampling;
  ConfidenceConfig confidence;
  Policy policy = Policy::PosteriorSampling;
  std::uint64_t seed = 0;
  /// Record per-episode wall time. Off by default so traces are reproducible
  /// byte for byte.
  bool timing = false;

  Index total_steps() const { return episodes * horizon; }
  void validate() const;
};

struct EpisodeRecord {
  Index episode = 0;      // 1-based
  Index start_cell = 0;   // lattice cell of the initial state
  double v_star = 0.0;    // V*_1(s_1)
  double achieved = 0.0;  // return of the executed policy
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  double info_gain = 0.0;  // after conditioning on this episode
  double xi_sum = 0.0;     // sum of widths along the executed trajectory
  double wall_ms = 0.0;
  Index posterior_points = 0;  // points conditioned on when planning
};

struct RegretTrace {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;

  double cumulative() const { return episodes.empty() ? 0.0 : episodes.back().cum_regret; }
};

struct RunResult {
  RegretTrace trace;
  std::vector<Transition> buffer;
  GpPosterior posterior;
};

/// Episodic posterior sampling with delayed updates: the posterior used in
/// episode k has seen exactly the (k - 1) H transitions of earlier episodes.
RunResult run(const RunConfig& cfg, const TabularMdp& mdp);

/// Contextless bandit case (H = 1, one state). Same loop as `run`.
RunResult run_h1_bandit(const RunConfig& cfg, const TabularMdp& mdp);

/// Converts a sampled model on the MDP's cell order into planning tables.
struct ModelTables {
  Matrix reward;     // S x A
  IndexMatrix next;  // S x A
};
ModelTables model_tables(const TabularMdp& mdp, const Matrix& values);

/// Observation produced by one transition.
Observation observe(const TabularMdp& mdp, const Transition& t);

}  // namespace rlgps
