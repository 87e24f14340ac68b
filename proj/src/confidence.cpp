#include "rlgps/confidence.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace rlgps {

double xi_from_std(const Eigen::Ref<const Vector>& sigma, double beta_value, const ConfidenceConfig& cfg) {
  if (sigma.size() < 1) throw InputError("xi_from_std: empty standard deviation vector");
  const double sigma_r = sigma(0);
  const double sigma_s = sigma.tail(sigma.size() - 1).norm();
  return beta_value * sigma_r + cfg.grad_bound * beta_value * sigma_s +
         0.5 * cfg.hess_bound * beta_value * beta_value * sigma_s * sigma_s;
}

double width_beta(const ConfidenceConfig& cfg, Index observations, Index total_steps, Index outputs) {
  if (total_steps < 1 || outputs < 1) throw InputError("width_beta: total steps and outputs must be positive");
  return beta(cfg, observations, cfg.delta / static_cast<double>(total_steps * outputs));
}

double xi_width(const GpPosterior& post, const ConfidenceConfig& cfg, const Vector& z, Index total_steps) {
  const Vector sigma = marginal_std(post, z);
  return xi_from_std(sigma, width_beta(cfg, post.size(), total_steps, post.outputs()), cfg);
}

Matrix predictive_means(const GpPosterior& post, const Matrix& points) {
  if (points.cols() != post.input_dim()) throw InputError("predictive_means: point has wrong dimension");
  const Index d = post.outputs();
  Matrix out = Matrix::Zero(points.rows(), d);
  if (post.size() == 0) return out;
  const LmcKernel& kern = post.kernel();
  const Matrix weights = Eigen::Map<const Matrix>(post.weights().data(), d, post.size());
  // Mean of output r at z: sum_i k_g(z_i, z) * (A w_i)_r.
  const Matrix mixed = kern.coregionalization() * weights;  // d x n
  constexpr Index kChunk = 512;
  for (Index start = 0; start < points.rows(); start += kChunk) {
    const Index len = std::min(kChunk, points.rows() - start);
    const Matrix cross = base_cross(kern.base, post.inputs(), points.middleRows(start, len));  // n x len
    out.middleRows(start, len) = cross.transpose() * mixed.transpose();
  }
  return out;
}

ConfidenceEnvelope build_envelope(const Matrix& mean_reward, const IndexMatrix& mean_next, const Matrix& xi,
                                  Index horizon) {
  const Index S = mean_reward.rows();
  const Index A = mean_reward.cols();
  if (mean_next.rows() != S || mean_next.cols() != A || xi.rows() != S || xi.cols() != A) {
    throw InputError("build_envelope: table shapes differ");
  }
  if (horizon < 1) throw InputError("build_envelope: horizon must be at least 1");
  if ((xi.array() < 0.0).any()) throw InputError("build_envelope: widths must be nonnegative");

  ConfidenceEnvelope env;
  env.xi = xi;
  env.q_upper.resize(std::size_t(horizon));
  env.q_lower.resize(std::size_t(horizon));
  env.v_upper = Matrix::Zero(horizon + 1, S);
  env.v_lower = Matrix::Zero(horizon + 1, S);
  for (Index h = horizon - 1; h >= 0; --h) {
    Matrix& qu = env.q_upper[std::size_t(h)];
    Matrix& ql = env.q_lower[std::size_t(h)];
    qu.resize(S, A);
    ql.resize(S, A);
    for (Index a = 0; a < A; ++a)
      for (Index s = 0; s < S; ++s) {
        const Index sn = mean_next(s, a);
        qu(s, a) = mean_reward(s, a) + env.v_upper(h + 1, sn) + xi(s, a);
        ql(s, a) = mean_reward(s, a) + env.v_lower(h + 1, sn) - xi(s, a);
      }
    env.v_upper.row(h) = qu.rowwise().maxCoeff().transpose();
    env.v_lower.row(h) = ql.rowwise().maxCoeff().transpose();
  }
  return env;
}

ConfidenceEnvelope build_envelope(const GpPosterior& post, const ConfidenceConfig& cfg, const TabularMdp& mdp,
                                  Index total_steps) {
  cfg.validate();
  if (post.outputs() != mdp.output_dim()) throw InputError("build_envelope: posterior outputs do not match the MDP");
  const Index S = mdp.num_states();
  const Index A = mdp.num_actions();
  const Matrix points = mdp.input_points();
  const Matrix mean = predictive_means(post, points);
  const Matrix var = marginal_variances(post, points);
  const double b = width_beta(cfg, post.size(), total_steps, post.outputs());

  Matrix reward(S, A);
  IndexMatrix next(S, A);
  Matrix xi(S, A);
  for (Index s = 0; s < S; ++s)
    for (Index a = 0; a < A; ++a) {
      const Index c = mdp.cell(s, a);
      reward(s, a) = mean(c, 0);
      next(s, a) = mdp.snap_state(mean.row(c).tail(mdp.state_dims()).transpose());
      xi(s, a) = xi_from_std(var.row(c).transpose().cwiseSqrt(), b, cfg);
    }
  return build_envelope(reward, next, xi, mdp.horizon);
}

SmoothnessBounds estimate_smoothness(const TabularMdp& mdp, const ValueTables& values, double inflation) {
  if (!(inflation > 0.0)) throw InputError("estimate_smoothness: inflation must be positive");
  SmoothnessBounds out;
  const GridSpec& grid = mdp.grid;
  const Index D = grid.state_dims;
  if (D == 0) return out;
  const double step = 1.0 / static_cast<double>(grid.bins);
  const Index L = grid.lattice_size();

  // State at lattice coordinates shifted by `delta`, or -1 (outside or wall).
  auto shifted = [&](std::vector<Index> c, Index dim, Index delta) -> Index {
    c[std::size_t(dim)] += delta;
    if (c[std::size_t(dim)] < 0 || c[std::size_t(dim)] >= grid.bins) return -1;
    return mdp.state_of_lattice[std::size_t(grid.lattice_index(c))];
  };
  auto shifted2 = [&](std::vector<Index> c, Index k, Index dk, Index l, Index dl) -> Index {
    c[std::size_t(k)] += dk;
    if (c[std::size_t(k)] < 0 || c[std::size_t(k)] >= grid.bins) return -1;
    return shifted(c, l, dl);
  };

  for (Index h = 0; h < values.horizon(); ++h) {
    const auto v = values.v.row(h);
    for (Index cell = 0; cell < L; ++cell) {
      const Index s = mdp.state_of_lattice[std::size_t(cell)];
      if (s < 0) continue;
      const std::vector<Index> c = grid.coords(cell);
      Vector g = Vector::Zero(D);
      Matrix hess = Matrix::Zero(D, D);
      bool hess_ok = true;
      for (Index k = 0; k < D; ++k) {
        const Index up = shifted(c, k, 1);
        const Index dn = shifted(c, k, -1);
        if (up >= 0 && dn >= 0) {
          g(k) = (v(up) - v(dn)) / (2.0 * step);
          hess(k, k) = (v(up) - 2.0 * v(s) + v(dn)) / (step * step);
        } else {
          if (up >= 0) g(k) = (v(up) - v(s)) / step;
          if (dn >= 0) g(k) = (v(s) - v(dn)) / step;
          hess_ok = false;
        }
        for (Index l = 0; l < k && hess_ok; ++l) {
          const Index pp = shifted2(c, k, 1, l, 1);
          const Index pm = shifted2(c, k, 1, l, -1);
          const Index mp = shifted2(c, k, -1, l, 1);
          const Index mm = shifted2(c, k, -1, l, -1);
          if (pp < 0 || pm < 0 || mp < 0 || mm < 0) {
            hess_ok = false;
            break;
          }
          hess(k, l) = hess(l, k) = (v(pp) - v(pm) - v(mp) + v(mm)) / (4.0 * step * step);
        }
      }
      out.grad = std::max(out.grad, g.norm());
      if (hess_ok) {
        const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(hess, Eigen::EigenvaluesOnly).eigenvalues();
        out.hess = std::max(out.hess, eig.cwiseAbs().maxCoeff());
      }
    }
  }
  out.grad *= inflation;
  out.hess *= inflation;
  return out;
}

}  // namespace rlgps
