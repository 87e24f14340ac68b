#pragma once

#include <vector>

#include "rlgps/env.hpp"
#include "rlgps/gp.hpp"
#include "rlgps/planner.hpp"

namespace rlgps {

/// Confidence width from a vector of marginal standard deviations ordered
/// [reward, transition...] and a confidence multiplier:
///   beta * sigma_R + u_G * beta * |sigma_S| + u_H * beta^2 * |sigma_S|^2 / 2.
double xi_from_std(const Eigen::Ref<const Vector>& sigma, double beta_value, const ConfidenceConfig& cfg);

/// Multiplier used for value-level bounds: beta(n, delta / (T d)).
double width_beta(const ConfidenceConfig& cfg, Index observations, Index total_steps, Index outputs);

double xi_width(const GpPosterior& post, const ConfidenceConfig& cfg, const Vector& z, Index total_steps);

/// Upper and lower value envelopes around the posterior-mean model.
struct ConfidenceEnvelope {
  std::vector<Matrix> q_upper;  // H x (S x A)
  std::vector<Matrix> q_lower;
  Matrix v_upper;               // (H + 1) x S
  Matrix v_lower;
  Matrix xi;                    // S x A
};

/// Envelope recursion from tabulated mean rewards, snapped mean transitions
/// and widths.
ConfidenceEnvelope build_envelope(const Matrix& mean_reward, const IndexMatrix& mean_next, const Matrix& xi,
                                  Index horizon);

ConfidenceEnvelope build_envelope(const GpPosterior& post, const ConfidenceConfig& cfg, const TabularMdp& mdp,
                                  Index total_steps);

/// Certified-by-estimate smoothness bounds of a value table.
struct SmoothnessBounds {
  double grad = 0.0;  // u_G
  double hess = 0.0;  // u_H
};

/// Max gradient norm and max Hessian operator norm of V_h over the state
/// lattice by finite differences (all h), multiplied by `inflation`.
SmoothnessBounds estimate_smoothness(const TabularMdp& mdp, const ValueTables& values, double inflation = 1.5);

/// Posterior means at the rows of `points` (m x d).
Matrix predictive_means(const GpPosterior& post, const Matrix& points);

}  // namespace rlgps
