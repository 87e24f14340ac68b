#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rlgps/agent.hpp"
#include "rlgps/confidence.hpp"
#include "rlgps/env.hpp"
#include "rlgps/gp.hpp"
#include "rlgps/planner.hpp"

namespace rlgps {

/// Lower end of the two-sided 95% Wilson score interval.
double wilson_lower(Index successes, Index trials, double z = 1.959963984540054);

/// Monte-Carlo coverage summary. Pass when the lower interval end reaches
/// `threshold` (1 - delta - 0.02 for the coverage checks).
struct CoverageReport {
  Index probes = 0;
  Index covered = 0;
  double frequency = 0.0;
  double lower_ci = 0.0;
  double threshold = 0.0;
  double worst_margin = 0.0;  // min over probes of (bound - deviation)
  bool pass = false;
};

// ---------------------------------------------------------------------------
// Value-level coverage

struct CoverageSetup {
  LmcKernel kernel = LmcKernel::independent({}, 2);
  GridSpec grid{1, 1, 6, false};  // 6 states x 6 actions
  Index horizon = 3;
  Index episodes = 4;
  double noise = 0.1;
  double beta_scale = 1.0;
  Index trials = 500;
  Index probes = 200;  // per trial
  double inflation = 1.5;
  std::uint64_t seed = 0;
};

/// Draws ground truth from the prior, runs posterior sampling and, before each
/// episode, probes random (h, s, a) for Q^l <= Q_proxy and Q* <= Q^u. The
/// smoothness bounds come from finite differences of V* per trial.
CoverageReport check_corollary_coverage(const CoverageSetup& setup, double delta);

// ---------------------------------------------------------------------------
// Composed-function bound

enum class TestFunction {
  Linear,           // v(s) = a^T s, u_G = |a|, u_H = 0
  HalfSquaredNorm,  // v(s) = |s|^2 / 2, u_H = 1, u_G = max |mu| over probes
};

struct ComposedSetup {
  LmcKernel kernel = LmcKernel::independent({}, 2);  // outputs play the role of d_S
  Index input_dim = 2;
  Index bins = 6;
  Index observations = 10;
  double noise = 0.1;
  double beta_scale = 1.0;
  Index trials = 500;
  std::uint64_t seed = 0;
};

CoverageReport check_composed_bound(TestFunction v, const ComposedSetup& setup, double delta);

// ---------------------------------------------------------------------------
// Potential inequalities

struct PotentialReport {
  Index length = 0;
  Index horizon = 1;
  double info_gain = 0.0;        // I_T of the whole sequence
  double block_info_gain = 0.0;  // max_h I of {z_h, z_{h+H}, ...}

  // sum_t |sigma_{t-1}(z_t)|^2 <= 2 I_T / log(1 + noise^-2)
  double potential_lhs = 0.0;
  double potential_rhs = 0.0;
  // Same sum against 2 M I_T / log(1 + M noise^-2), M = lambda_max(A) variance.
  double potential_rhs_spectral = 0.0;

  // sum_t |sigma_{H floor((t-1)/H)}(z_t)| against
  // sqrt((c G / L) (T + c H^2 G_K / L)), L = log(1 + noise^-2), c = 4 and c = 2.
  double delayed_lhs = 0.0;
  double delayed_rhs = 0.0;
  double delayed_rhs_tight = 0.0;

  // Worst case over t' < t and sequence points z of
  // |sigma_t'(z)|^2 <= |sigma_t(z)|^2 (1 + sum_{j=t'+1}^{t} |sigma_t'(z_j)|^2),
  // and of the same with the sum scaled by noise^-2.
  double ratio_margin = 0.0;
  double ratio_margin_scaled = 0.0;

  static constexpr double kSlack = 1e-8;
  bool variance_sum() const { return potential_lhs <= potential_rhs + kSlack; }
  bool variance_sum_spectral() const { return potential_lhs <= potential_rhs_spectral + kSlack; }
  bool delayed_sum() const { return delayed_lhs <= delayed_rhs + kSlack; }
  bool delayed_sum_tight() const { return delayed_lhs <= delayed_rhs_tight + kSlack; }
  bool variance_ratio() const { return ratio_margin >= -kSlack; }
  bool variance_ratio_scaled() const { return ratio_margin_scaled >= -kSlack; }
};

/// Evaluates the three inequalities on the rows of `sequence`. Requires every
/// per-output prior variance to be at most 1.
PotentialReport check_potential_bounds(const LmcKernel& kernel, double noise, const Matrix& sequence, Index horizon);

struct PotentialSuiteSpec {
  Index sequences = 500;
  Index max_length = 50;
  Index max_outputs = 3;
  Index input_dim = 2;
  std::vector<Index> horizons{1, 2, 5};
  double noise = 0.1;
  bool correlated = true;  // random LMC mixing, else A = I
  std::uint64_t seed = 0;
};

struct PotentialTally {
  Index passed = 0;
  double worst_margin = 0.0;  // min of rhs - lhs
};

struct PotentialSuiteReport {
  Index sequences = 0;
  PotentialTally variance_sum, variance_sum_spectral, delayed_sum, delayed_sum_tight, variance_ratio, variance_ratio_scaled;
};

/// Random kernels (family, lengthscale, mixing scaled to unit max diagonal),
/// lengths, horizons and input sequences, a fifth of them with repeated points.
PotentialSuiteReport run_potential_suite(const PotentialSuiteSpec& spec);

// ---------------------------------------------------------------------------
// Trace summaries

struct GammaRow {
  Index episode = 0;
  Index steps = 0;  // T = k H
  double max_info_gain = 0.0;
  double mean_info_gain = 0.0;
  Index runs = 0;
};

/// Measured information gain per episode across runs (max and mean).
std::vector<GammaRow> gamma_report(std::span<const RegretTrace> traces, Index horizon);

/// Eigenvalues of the coregionalization matrix, ascending.
Vector coregionalization_eigenvalues(const LmcKernel& kernel);

struct WidthRatio {
  double fitted_c = 0.0;  // smallest c with regret_k <= c * xi_sum_k for all k
  double median = 0.0;
  Index episodes = 0;
};

WidthRatio fit_width_ratio(std::span<const RegretTrace> traces);

/// Per-step split of the value gap along an executed trajectory:
/// total = V*_h(s_h) - V^pi_h(s_h), immediate = V*_h(s_h) - Q*_h(s_h, a_h),
/// future = V*_{h+1}(s_{h+1}) - V^pi_{h+1}(s_{h+1}).
struct RegretStep {
  double total = 0.0;
  double immediate = 0.0;
  double future = 0.0;
  double residual = 0.0;  // total - immediate - future
};

std::vector<RegretStep> regret_decomposition(const ValueTables& optimal, const Trajectory& trajectory);

}  // namespace rlgps
