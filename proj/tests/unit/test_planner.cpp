#include <doctest.h>

#include <random>

#include "rlgps/planner.hpp"
#include "unit/oracles.hpp"

using namespace rlgps;

namespace {

IndexMatrix random_next(Index S, Index A, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> pick(0, S - 1);
  IndexMatrix next(S, A);
  for (Index s = 0; s < S; ++s)
    for (Index a = 0; a < A; ++a) next(s, a) = pick(rng);
  return next;
}

}  // namespace

TEST_CASE("backward induction matches exhaustive enumeration") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<Index> pick_s(1, 6), pick_a(1, 3), pick_h(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const Index S = pick_s(rng), A = pick_a(rng), H = pick_h(rng);
    const Matrix reward = oracle::normal(S, A, rng);
    const IndexMatrix next = random_next(S, A, rng);
    const ValueTables t = backward_induction(reward, next, H);
    REQUIRE(t.horizon() == H);
    CHECK(t.v.row(H).isZero());
    for (Index h = 0; h < H; ++h)
      for (Index s = 0; s < S; ++s) CHECK(t.v(h, s) == doctest::Approx(oracle::enumerate_best(reward, next, s, H - h)).epsilon(1e-12));
  }
}

TEST_CASE("greedy choices and ties") {
  Matrix reward(1, 3);
  reward << 1.0, 1.0, 0.5;
  IndexMatrix next = IndexMatrix::Zero(1, 3);
  const ValueTables t = backward_induction(reward, next, 2);
  CHECK(t.greedy(0, 0) == 0);
  CHECK(t.v(0, 0) == 2.0);
  CHECK(t.q[0](0, 2) == 1.5);
}

TEST_CASE("rollout return equals the planned value") {
  std::mt19937_64 rng(5);
  Vector goal(2);
  goal << 0.9, 0.9;
  const TabularMdp nav = make_navigation_env(GridSpec{2, 1, 6, true}, goal, 8);
  const ValueTables t = optimal_values(nav);
  for (Index s = 0; s < nav.num_states(); ++s) {
    const Trajectory tr = rollout(nav, t, s);
    CHECK(tr.steps.size() == 8);
    CHECK(tr.total_return == doctest::Approx(t.v(0, s)).epsilon(1e-14));
    CHECK(tr.steps.front().state == s);
    for (std::size_t i = 1; i < tr.steps.size(); ++i) CHECK(tr.steps[i].state == tr.steps[i - 1].next_state);
  }
}

TEST_CASE("navigation values favor cells near the goal") {
  Vector goal(2);
  goal << 0.9, 0.9;
  const TabularMdp nav = make_navigation_env(GridSpec{2, 1, 4, true}, goal, 6);
  const ValueTables t = optimal_values(nav);
  Vector far = Vector::Constant(2, 0.1);
  const Index goal_state = nav.snap_state(goal);
  const Index far_state = nav.snap_state(far);
  CHECK(t.v(0, goal_state) >= t.v(0, far_state));
  CHECK(t.v(0, goal_state) == doctest::Approx(oracle::enumerate_best(nav.reward, nav.next, goal_state, 6)));
  CHECK(t.v(0, far_state) == doctest::Approx(oracle::enumerate_best(nav.reward, nav.next, far_state, 6)));
}

TEST_CASE("maze values follow corridor distance") {
  const Index bins = 6, H = 12;
  const MazeLayout m = MazeLayout::s_corridor(bins);
  const TabularMdp maze = make_maze_env(m, GridSpec{2, 1, bins, true}, H);
  const ValueTables t = optimal_values(maze);

  // Breadth-first compass distance to the goal cell.
  const Index goal = maze.snap_state(m.goal);
  std::vector<Index> dist(std::size_t(maze.num_states()), -1);
  std::vector<Index> frontier{goal};
  dist[std::size_t(goal)] = 0;
  while (!frontier.empty()) {
    std::vector<Index> grown;
    for (Index s : frontier)
      for (Index s2 = 0; s2 < maze.num_states(); ++s2) {
        if (dist[std::size_t(s2)] >= 0) continue;
        for (Index a = 0; a < 9; ++a)
          if (maze.next(s2, a) == s) {
            dist[std::size_t(s2)] = dist[std::size_t(s)] + 1;
            grown.push_back(s2);
            break;
          }
      }
    frontier = grown;
  }
  for (Index s = 0; s < maze.num_states(); ++s) {
    const Index d = dist[std::size_t(s)];
    REQUIRE(d >= 0);
    const double expected = d <= H ? -0.01 * double(d) + double(H - d) : -0.01 * double(H);
    CHECK(t.v(0, s) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("invalid tables are rejected") {
  CHECK_THROWS_AS(backward_induction(Matrix::Zero(2, 2), IndexMatrix::Zero(3, 2), 2), InputError);
  CHECK_THROWS_AS(backward_induction(Matrix::Zero(2, 2), IndexMatrix::Constant(2, 2, 5), 2), InputError);
  CHECK_THROWS_AS(backward_induction(Matrix::Zero(2, 2), IndexMatrix::Zero(2, 2), 0), InputError);
}
