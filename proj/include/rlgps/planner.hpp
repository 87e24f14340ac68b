#pragma once

#include <vector>

#include "rlgps/env.hpp"
#include "rlgps/types.hpp"

namespace rlgps {

/// Finite-horizon value tables. Steps are 0-based: q[h] is the state-action
/// value with H - h steps to go, v.row(H) is identically zero.
struct ValueTables {
  std::vector<Matrix> q;  // H entries of S x A
  Matrix v;               // (H + 1) x S
  IndexMatrix greedy;     // H x S, lowest index among maximizers

  Index horizon() const { return Index(q.size()); }
  Index num_states() const { return v.cols(); }
};

/// Exact backward induction Q_h(s,a) = r(s,a) + V_{h+1}(next(s,a)),
/// V_h(s) = max_a Q_h(s,a), from h = H - 1 down to 0.
ValueTables backward_induction(const Matrix& reward, const IndexMatrix& next, Index horizon);

/// Value tables of the true MDP.
ValueTables optimal_values(const TabularMdp& mdp);

struct Transition {
  Index state;
  Index action;
  double reward;
  Index next_state;
};

struct Trajectory {
  std::vector<Transition> steps;
  double total_return = 0.0;
};

/// Follows `tables.greedy` on the true MDP for H steps from `start`.
Trajectory rollout(const TabularMdp& mdp, const ValueTables& tables, Index start);

}  // namespace rlgps
