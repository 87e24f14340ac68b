#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rlgps/gp.hpp"
#include "rlgps/kernel.hpp"
#include "rlgps/types.hpp"

namespace rlgps {

/// Regular lattice over the unit box [0,1]^state_dims with `bins` cells per
/// dimension. Actions are either a lattice over [0,1]^action_dims with the
/// same bin count, or the nine compass moves (including "stay") on a 2-D
/// state lattice. state_dims == 0 gives a single-state (bandit) problem.
struct GridSpec {
  Index state_dims = 2;
  Index action_dims = 1;
  Index bins = 10;
  bool compass_actions = false;

  void validate() const;
  Index lattice_size() const;
  Index num_actions() const;
  double center(Index bin) const { return (static_cast<double>(bin) + 0.5) / static_cast<double>(bins); }
  /// Per-dimension bin indices of a lattice cell (dimension 0 fastest).
  std::vector<Index> coords(Index lattice) const;
  Index lattice_index(const std::vector<Index>& coords) const;
  Vector cell_point(Index lattice) const;
};

/// Nearest lattice cell to `x` after clamping into the box. Per-coordinate
/// nearest center (L-infinity), exact midpoints go to the lower bin.
Index snap_to_grid(const GridSpec& grid, const Vector& x);

inline constexpr double kGoalRadius = 0.1;
inline constexpr double kGoalReward = 1.0;
inline constexpr double kStepPenalty = -0.01;

enum class InitialStateLaw { Fixed, UniformFree };

/// Deterministic finite-horizon MDP over the free cells of a grid.
struct TabularMdp {
  GridSpec grid;
  std::vector<Index> lattice_of_state;  // state -> lattice cell
  std::vector<Index> state_of_lattice;  // lattice cell -> state, -1 for walls
  Matrix state_points;                  // S x state_dims
  Matrix action_points;                 // A x action encoding dims
  Matrix reward;                        // S x A
  IndexMatrix next;                     // S x A
  Index horizon = 1;
  InitialStateLaw initial_law = InitialStateLaw::UniformFree;
  Index fixed_start = 0;

  Index num_states() const { return reward.rows(); }
  Index num_actions() const { return reward.cols(); }
  Index state_dims() const { return grid.state_dims; }
  /// Output dimension of the joint reward/transition model.
  Index output_dim() const { return 1 + grid.state_dims; }
  Index input_dim() const { return state_points.cols() + action_points.cols(); }
  /// Flat index of a state-action cell; states are the slow index.
  Index cell(Index s, Index a) const { return s * num_actions() + a; }

  Vector input_point(Index s, Index a) const;
  /// (S*A) x input_dim matrix of all state-action inputs, in cell order.
  Matrix input_points() const;
  /// Nearest free state to a continuous point.
  Index snap_state(const Vector& x) const;
  Index sample_start(Rng& rng) const;

  /// Throws ConfigError if tables are inconsistent or point at invalid states.
  void validate() const;
};

struct StepResult {
  Index next_state;
  double reward;
};

StepResult step(const TabularMdp& mdp, Index s, Index a);

/// Ground truth drawn from the GP prior on the full state-action grid.
/// Rewards are min-max rescaled to [0, 1] unless `normalize_rewards` is
/// false; transitions are clamped and snapped to cells.
TabularMdp make_gp_sampled_env(const LmcKernel& kernel, std::uint64_t seed, const GridSpec& grid, Index horizon,
                               bool normalize_rewards = true);

/// Sparse-reward navigation on a 2-D grid with the nine compass actions.
TabularMdp make_navigation_env(const GridSpec& grid, const Vector& goal, Index horizon);

struct MazeLayout {
  Index bins = 0;
  std::vector<bool> walls;  // lattice order, row 0 = lowest y
  Vector goal;
  double goal_radius = kGoalRadius;

  bool is_wall(Index col, Index row) const { return walls[std::size_t(row * bins + col)]; }

  /// S-shaped corridor: full-width walls at rows bins/3 and 2*bins/3 with
  /// one-cell gaps at opposite ends; goal in the top-right cell.
  static MazeLayout s_corridor(Index bins);
  /// Text grid, first line is the top row: '#' wall, '.' free, 'G' goal.
  static MazeLayout parse(std::istream& in);
  static MazeLayout load(const std::string& path);
};

/// True when every free cell reaches the goal cell under the compass moves.
bool maze_connected(const MazeLayout& layout);

TabularMdp make_maze_env(const MazeLayout& layout, const GridSpec& grid, Index horizon);

}  // namespace rlgps
