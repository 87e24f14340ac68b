#include "rlgps/planner.hpp"

namespace rlgps {

ValueTables backward_induction(const Matrix& reward, const IndexMatrix& next, Index horizon) {
  const Index S = reward.rows();
  const Index A = reward.cols();
  if (horizon < 1) throw InputError("backward_induction: horizon must be at least 1");
  if (next.rows() != S || next.cols() != A) throw InputError("backward_induction: table shapes differ");
  if ((next.array() < 0).any() || (next.array() >= S).any()) {
    throw InputError("backward_induction: transition target out of range");
  }

  ValueTables out;
  out.q.resize(std::size_t(horizon));
  out.v = Matrix::Zero(horizon + 1, S);
  out.greedy.resize(horizon, S);
  for (Index h = horizon - 1; h >= 0; --h) {
    Matrix& q = out.q[std::size_t(h)];
    q.resize(S, A);
    for (Index a = 0; a < A; ++a)
      for (Index s = 0; s < S; ++s) q(s, a) = reward(s, a) + out.v(h + 1, next(s, a));
    for (Index s = 0; s < S; ++s) {
      Index best = 0;
      for (Index a = 1; a < A; ++a)
        if (q(s, a) > q(s, best)) best = a;
      out.greedy(h, s) = best;
      out.v(h, s) = q(s, best);
    }
  }
  return out;
}

ValueTables optimal_values(const TabularMdp& mdp) { return backward_induction(mdp.reward, mdp.next, mdp.horizon); }

Trajectory rollout(const TabularMdp& mdp, const ValueTables& tables, Index start) {
  if (tables.horizon() != mdp.horizon || tables.num_states() != mdp.num_states()) {
    throw InputError("rollout: value tables do not match the MDP");
  }
  Trajectory out;
  out.steps.reserve(std::size_t(mdp.horizon));
  Index s = start;
  for (Index h = 0; h < mdp.horizon; ++h) {
    const Index a = tables.greedy(h, s);
    const StepResult r = step(mdp, s, a);
    out.steps.push_back({s, a, r.reward, r.next_state});
    out.total_return += r.reward;
    s = r.next_state;
  }
  return out;
}

}  // namespace rlgps
