#include "rlgps/env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <string>

namespace rlgps {

namespace {

Index ipow(Index base, Index exp) {
  Index out = 1;
  for (Index i = 0; i < exp; ++i) out *= base;
  return out;
}

bool within_goal(const Vector& point, const Vector& goal, double radius) {
  return (point - goal).norm() <= radius + 1e-9;
}

/// Lattice of action points over [0,1]^action_dims.
Matrix action_lattice(const GridSpec& grid) {
  GridSpec actions = grid;
  actions.state_dims = grid.action_dims;
  Matrix out(actions.lattice_size(), grid.action_dims);
  for (Index a = 0; a < out.rows(); ++a) out.row(a) = actions.cell_point(a).transpose();
  return out;
}

constexpr int kCompass[9][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 0}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};

Matrix compass_points() {
  Matrix out(9, 2);
  for (Index a = 0; a < 9; ++a) {
    out(a, 0) = (kCompass[a][0] + 1) / 2.0;
    out(a, 1) = (kCompass[a][1] + 1) / 2.0;
  }
  return out;
}

/// Shared constructor for the navigation and maze environments.
TabularMdp make_compass_env(const GridSpec& grid, const std::vector<bool>& walls, const Vector& goal, double radius,
                            Index horizon) {
  GridSpec g = grid;
  g.compass_actions = true;
  g.validate();
  if (g.state_dims != 2) throw ConfigError("compass-action environments need state_dims = 2");
  if (goal.size() != 2 || (goal.array() < 0.0).any() || (goal.array() > 1.0).any()) {
    throw ConfigError("navigation goal must lie inside the unit box");
  }
  if (horizon < 1) throw ConfigError("horizon must be at least 1");

  TabularMdp mdp;
  mdp.grid = g;
  mdp.horizon = horizon;
  mdp.state_of_lattice.assign(std::size_t(g.lattice_size()), -1);
  for (Index c = 0; c < g.lattice_size(); ++c) {
    if (!walls.empty() && walls[std::size_t(c)]) continue;
    mdp.state_of_lattice[std::size_t(c)] = Index(mdp.lattice_of_state.size());
    mdp.lattice_of_state.push_back(c);
  }
  const Index states = Index(mdp.lattice_of_state.size());
  mdp.state_points.resize(states, 2);
  for (Index s = 0; s < states; ++s) mdp.state_points.row(s) = g.cell_point(mdp.lattice_of_state[std::size_t(s)]).transpose();
  mdp.action_points = compass_points();
  mdp.reward.resize(states, 9);
  mdp.next.resize(states, 9);
  for (Index s = 0; s < states; ++s) {
    const std::vector<Index> at = g.coords(mdp.lattice_of_state[std::size_t(s)]);
    const double r = within_goal(mdp.state_points.row(s).transpose(), goal, radius) ? kGoalReward : kStepPenalty;
    for (Index a = 0; a < 9; ++a) {
      const Index x = std::clamp<Index>(at[0] + kCompass[a][0], 0, g.bins - 1);
      const Index y = std::clamp<Index>(at[1] + kCompass[a][1], 0, g.bins - 1);
      const Index target = mdp.state_of_lattice[std::size_t(g.lattice_index({x, y}))];
      mdp.next(s, a) = target >= 0 ? target : s;
      mdp.reward(s, a) = r;
    }
  }
  mdp.validate();
  return mdp;
}

}  // namespace

// --------------------------------------------------------------------------
// GridSpec

void GridSpec::validate() const {
  if (bins < 2) throw ConfigError("bins must be at least 2");
  if (state_dims < 0) throw ConfigError("state_dims must be nonnegative");
  if (compass_actions) {
    if (state_dims != 2) throw ConfigError("compass actions need a 2-D state space");
  } else if (action_dims < 1) {
    throw ConfigError("action_dims must be at least 1");
  }
}

Index GridSpec::lattice_size() const { return ipow(bins, state_dims); }

Index GridSpec::num_actions() const { return compass_actions ? 9 : ipow(bins, action_dims); }

std::vector<Index> GridSpec::coords(Index lattice) const {
  std::vector<Index> out(static_cast<std::size_t>(state_dims));
  for (auto& c : out) {
    c = lattice % bins;
    lattice /= bins;
  }
  return out;
}

Index GridSpec::lattice_index(const std::vector<Index>& coords) const {
  Index out = 0;
  for (std::size_t k = coords.size(); k-- > 0;) out = out * bins + coords[k];
  return out;
}

Vector GridSpec::cell_point(Index lattice) const {
  const std::vector<Index> c = coords(lattice);
  Vector out(state_dims);
  for (Index k = 0; k < state_dims; ++k) out(k) = center(c[std::size_t(k)]);
  return out;
}

Index snap_to_grid(const GridSpec& grid, const Vector& x) {
  if (x.size() != grid.state_dims) throw InputError("snap_to_grid: point has wrong dimension");
  std::vector<Index> c(std::size_t(grid.state_dims));
  for (Index k = 0; k < grid.state_dims; ++k) {
    const double v = std::clamp(x(k), 0.0, 1.0);
    Index hi = std::clamp<Index>(static_cast<Index>(std::floor(v * double(grid.bins))), 0, grid.bins - 1);
    // Candidates hi-1 and hi; ties go to the lower bin.
    if (hi > 0 && std::abs(v - grid.center(hi - 1)) <= std::abs(v - grid.center(hi))) --hi;
    c[std::size_t(k)] = hi;
  }
  return grid.lattice_index(c);
}

// --------------------------------------------------------------------------
// TabularMdp

Vector TabularMdp::input_point(Index s, Index a) const {
  Vector out(input_dim());
  out << state_points.row(s).transpose(), action_points.row(a).transpose();
  return out;
}

Matrix TabularMdp::input_points() const {
  Matrix out(num_states() * num_actions(), input_dim());
  for (Index s = 0; s < num_states(); ++s)
    for (Index a = 0; a < num_actions(); ++a) {
      out.row(cell(s, a)).head(state_points.cols()) = state_points.row(s);
      out.row(cell(s, a)).tail(action_points.cols()) = action_points.row(a);
    }
  return out;
}

Index TabularMdp::snap_state(const Vector& x) const {
  const Index lattice = snap_to_grid(grid, x);
  const Index s = state_of_lattice[std::size_t(lattice)];
  if (s >= 0) return s;
  // Wall cell: nearest free state, lowest index on ties.
  const Vector p = x.cwiseMax(0.0).cwiseMin(1.0);
  Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < num_states(); ++t) {
    const double dist = (state_points.row(t).transpose() - p).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = t;
    }
  }
  return best;
}

Index TabularMdp::sample_start(Rng& rng) const {
  if (initial_law == InitialStateLaw::Fixed) return fixed_start;
  std::uniform_int_distribution<Index> pick(0, num_states() - 1);
  return pick(rng);
}

void TabularMdp::validate() const {
  const Index S = num_states();
  const Index A = num_actions();
  if (S < 1 || A < 1) throw ConfigError("MDP needs at least one state and one action");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (next.rows() != S || next.cols() != A) throw ConfigError("transition table has wrong shape");
  if (Index(lattice_of_state.size()) != S || state_points.rows() != S) throw ConfigError("state tables disagree");
  if (action_points.rows() != A) throw ConfigError("action table has wrong shape");
  if (!reward.allFinite()) throw ConfigError("reward table has non-finite entries");
  if ((next.array() < 0).any() || (next.array() >= S).any()) throw ConfigError("transition target out of range");
  if (initial_law == InitialStateLaw::Fixed && (fixed_start < 0 || fixed_start >= S)) {
    throw ConfigError("fixed start state out of range");
  }
}

StepResult step(const TabularMdp& mdp, Index s, Index a) {
  if (s < 0 || s >= mdp.num_states()) throw InputError("step: state index " + std::to_string(s) + " out of range");
  if (a < 0 || a >= mdp.num_actions()) throw InputError("step: action index " + std::to_string(a) + " out of range");
  return {mdp.next(s, a), mdp.reward(s, a)};
}

// --------------------------------------------------------------------------
// Environments

TabularMdp make_gp_sampled_env(const LmcKernel& kernel, std::uint64_t seed, const GridSpec& grid, Index horizon,
                               bool normalize_rewards) {
  grid.validate();
  if (grid.compass_actions) throw ConfigError("GP-sampled environments use lattice actions");
  if (kernel.outputs() != 1 + grid.state_dims) {
    throw ConfigError("GP-sampled environment needs a kernel with 1 + state_dims = " +
                      std::to_string(1 + grid.state_dims) + " outputs, got " + std::to_string(kernel.outputs()));
  }
  if (horizon < 1) throw ConfigError("horizon must be at least 1");

  TabularMdp mdp;
  mdp.grid = grid;
  mdp.horizon = horizon;
  const Index S = grid.lattice_size();
  for (Index c = 0; c < S; ++c) {
    mdp.lattice_of_state.push_back(c);
    mdp.state_of_lattice.push_back(c);
  }
  mdp.state_points.resize(S, grid.state_dims);
  for (Index s = 0; s < S; ++s) mdp.state_points.row(s) = grid.cell_point(s).transpose();
  mdp.action_points = action_lattice(grid);
  const Index A = mdp.action_points.rows();
  mdp.reward.resize(S, A);
  mdp.next.resize(S, A);

  const Matrix inputs = mdp.input_points();
  SamplingSpec spec;
  if (inputs.rows() * kernel.outputs() > kExactSamplingCapacity) spec.mode = SamplingMode::Nystrom;
  const GpPosterior prior(kernel, 1.0, mdp.input_dim());
  Rng rng(seed);
  const SampledModel sample = sample_on_grid(prior, inputs, spec, rng);

  const double lo = sample.reward().minCoeff();
  const double hi = sample.reward().maxCoeff();
  const double span = hi - lo;
  for (Index s = 0; s < S; ++s)
    for (Index a = 0; a < A; ++a) {
      const Index c = mdp.cell(s, a);
      if (!normalize_rewards)
        mdp.reward(s, a) = sample.values(c, 0);
      else
        mdp.reward(s, a) = span > 0.0 ? (sample.values(c, 0) - lo) / span : 0.0;
      mdp.next(s, a) = mdp.snap_state(sample.values.row(c).tail(grid.state_dims).transpose());
    }
  mdp.validate();
  return mdp;
}

TabularMdp make_navigation_env(const GridSpec& grid, const Vector& goal, Index horizon) {
  return make_compass_env(grid, {}, goal, kGoalRadius, horizon);
}

MazeLayout MazeLayout::s_corridor(Index bins) {
  if (bins < 4) throw ConfigError("maze needs at least 4 bins");
  MazeLayout layout;
  layout.bins = bins;
  layout.walls.assign(std::size_t(bins * bins), false);
  const Index low = bins / 3;
  const Index high = 2 * bins / 3;
  for (Index col = 0; col < bins; ++col) {
    if (col != bins - 1) layout.walls[std::size_t(low * bins + col)] = true;
    if (col != 0) layout.walls[std::size_t(high * bins + col)] = true;
  }
  layout.goal = Vector::Constant(2, (double(bins - 1) + 0.5) / double(bins));
  return layout;
}

MazeLayout MazeLayout::parse(std::istream& in) {
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!rows.empty() && line.size() != rows.front().size()) {
      throw ParseError("maze layout is not rectangular", rows.size() + 1);
    }
    rows.push_back(line);
  }
  if (rows.empty()) throw ParseError("maze layout is empty", 1);
  const Index height = Index(rows.size());
  const Index width = Index(rows.front().size());
  if (height != width) throw ParseError("maze layout must be square", 1);

  MazeLayout layout;
  layout.bins = width;
  layout.walls.assign(std::size_t(width * height), false);
  int goals = 0;
  for (Index r = 0; r < height; ++r) {
    const Index row = height - 1 - r;  // first line is the top row
    for (Index col = 0; col < width; ++col) {
      const char ch = rows[std::size_t(r)][std::size_t(col)];
      if (ch == '#') {
        layout.walls[std::size_t(row * width + col)] = true;
      } else if (ch == 'G') {
        ++goals;
        layout.goal = Vector(2);
        layout.goal << (double(col) + 0.5) / double(width), (double(row) + 0.5) / double(width);
      } else if (ch != '.') {
        throw ParseError(std::string("unexpected maze character '") + ch + "'", std::size_t(r) + 1);
      }
    }
  }
  if (goals != 1) throw ParseError("maze layout needs exactly one 'G' cell", 1);
  return layout;
}

MazeLayout MazeLayout::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open maze layout '" + path + "'");
  return parse(in);
}

bool maze_connected(const MazeLayout& layout) {
  const Index bins = layout.bins;
  const Index gx = std::clamp<Index>(Index(layout.goal(0) * double(bins)), 0, bins - 1);
  const Index gy = std::clamp<Index>(Index(layout.goal(1) * double(bins)), 0, bins - 1);
  if (layout.is_wall(gx, gy)) return false;
  std::vector<bool> seen(layout.walls.size(), false);
  std::deque<std::pair<Index, Index>> queue{{gx, gy}};
  seen[std::size_t(gy * bins + gx)] = true;
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (const auto& move : kCompass) {
      const Index nx = x + move[0];
      const Index ny = y + move[1];
      if (nx < 0 || ny < 0 || nx >= bins || ny >= bins || layout.is_wall(nx, ny)) continue;
      if (!seen[std::size_t(ny * bins + nx)]) {
        seen[std::size_t(ny * bins + nx)] = true;
        queue.emplace_back(nx, ny);
      }
    }
  }
  for (std::size_t c = 0; c < seen.size(); ++c)
    if (!layout.walls[c] && !seen[c]) return false;
  return true;
}

TabularMdp make_maze_env(const MazeLayout& layout, const GridSpec& grid, Index horizon) {
  if (layout.bins != grid.bins) {
    throw ConfigError("maze layout has " + std::to_string(layout.bins) + " bins but the grid has " +
                      std::to_string(grid.bins));
  }
  if (!maze_connected(layout)) throw ConfigError("maze layout is disconnected: some free cell cannot reach the goal");
  return make_compass_env(grid, layout.walls, layout.goal, layout.goal_radius, horizon);
}

}  // namespace rlgps
