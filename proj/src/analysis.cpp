#include "rlgps/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>

namespace rlgps {

double wilson_lower(Index successes, Index trials, double z) {
  if (trials <= 0) return 0.0;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = p + z2 / (2.0 * n);
  const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return std::max(0.0, (centre - spread) / (1.0 + z2 / n));
}

namespace {

void finish(CoverageReport& r, double threshold) {
  r.frequency = r.probes > 0 ? static_cast<double>(r.covered) / static_cast<double>(r.probes) : 0.0;
  r.lower_ci = wilson_lower(r.covered, r.probes);
  r.threshold = threshold;
  r.pass = r.probes > 0 && r.lower_ci >= threshold;
}

Matrix unit_lattice(Index dims, Index bins) {
  Index count = 1;
  for (Index k = 0; k < dims; ++k) count *= bins;
  Matrix out(count, dims);
  for (Index i = 0; i < count; ++i) {
    Index rest = i;
    for (Index k = 0; k < dims; ++k) {
      out(i, k) = (static_cast<double>(rest % bins) + 0.5) / static_cast<double>(bins);
      rest /= bins;
    }
  }
  return out;
}

Matrix sqrt_rows(const Matrix& var) { return var.cwiseMax(0.0).cwiseSqrt(); }

}  // namespace

// ---------------------------------------------------------------------------
// Value-level coverage

CoverageReport check_corollary_coverage(const CoverageSetup& setup, double delta) {
  if (setup.trials < 1 || setup.episodes < 1 || setup.probes < 1) {
    throw ConfigError("coverage check needs positive trials, episodes and probes");
  }
  ConfidenceConfig base;
  base.delta = delta;
  base.beta_scale = setup.beta_scale;
  base.validate();

  CoverageReport report;
  report.worst_margin = std::numeric_limits<double>::infinity();
  const Index H = setup.horizon;
  const Index K = setup.episodes;
  const Index T = K * H;

  for (Index trial = 0; trial < setup.trials; ++trial) {
    const std::uint64_t trial_seed = setup.seed + static_cast<std::uint64_t>(trial);
    const TabularMdp mdp = make_gp_sampled_env(setup.kernel, trial_seed, setup.grid, H, false);
    const ValueTables optimal = optimal_values(mdp);
    const SmoothnessBounds smooth = estimate_smoothness(mdp, optimal, setup.inflation);
    ConfidenceConfig cfg = base;
    cfg.grad_bound = smooth.grad;
    cfg.hess_bound = smooth.hess;

    const Matrix points = mdp.input_points();
    const GridSampler sampler(setup.kernel, points);
    GpPosterior post(setup.kernel, setup.noise, mdp.input_dim());
    Rng rng(trial_seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<Index> pick_h(0, H - 1);
    std::uniform_int_distribution<Index> pick_s(0, mdp.num_states() - 1);
    std::uniform_int_distribution<Index> pick_a(0, mdp.num_actions() - 1);

    for (Index k = 0; k < K; ++k) {
      const ConfidenceEnvelope env = build_envelope(post, cfg, mdp, T);
      const ModelTables sampled = model_tables(mdp, sampler.sample(post, {}, rng).values);
      const ValueTables proxy = backward_induction(sampled.reward, sampled.next, H);

      const Index probes = setup.probes * (k + 1) / K - setup.probes * k / K;
      for (Index p = 0; p < probes; ++p) {
        const auto h = std::size_t(pick_h(rng));
        const Index s = pick_s(rng);
        const Index a = pick_a(rng);
        const double lower_gap = proxy.q[h](s, a) - env.q_lower[h](s, a);
        const double upper_gap = env.q_upper[h](s, a) - optimal.q[h](s, a);
        const double margin = std::min(lower_gap, upper_gap);
        report.worst_margin = std::min(report.worst_margin, margin);
        ++report.probes;
        if (margin >= 0.0) ++report.covered;
      }

      const Trajectory traj = rollout(mdp, proxy, mdp.sample_start(rng));
      std::vector<Observation> batch;
      batch.reserve(traj.steps.size());
      for (const Transition& t : traj.steps) batch.push_back(observe(mdp, t));
      post = condition(std::move(post), batch);
    }
  }
  finish(report, 1.0 - delta - 0.02);
  return report;
}

// ---------------------------------------------------------------------------
// Composed-function bound

CoverageReport check_composed_bound(TestFunction v, const ComposedSetup& setup, double delta) {
  if (setup.trials < 1 || setup.observations < 0) throw ConfigError("composed check needs positive trials");
  ConfidenceConfig cfg;
  cfg.delta = delta;
  cfg.beta_scale = setup.beta_scale;
  cfg.validate();

  const Index d = setup.kernel.outputs();
  const Matrix cells = unit_lattice(setup.input_dim, setup.bins);
  const Index m = cells.rows();
  const GridSampler sampler(setup.kernel, cells);
  const GpPosterior prior(setup.kernel, setup.noise, setup.input_dim);
  Vector coeffs(d);
  for (Index r = 0; r < d; ++r) coeffs(r) = (r % 2 == 0 ? 1.0 : -1.0) / std::sqrt(static_cast<double>(r + 1));

  auto apply = [&](const Vector& s) { return v == TestFunction::Linear ? coeffs.dot(s) : 0.5 * s.squaredNorm(); };

  CoverageReport report;
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (Index trial = 0; trial < setup.trials; ++trial) {
    Rng rng(setup.seed + static_cast<std::uint64_t>(trial));
    const Matrix truth = sampler.sample_values(prior, {}, rng);

    std::uniform_int_distribution<Index> pick(0, m - 1);
    std::normal_distribution<double> noise;
    std::vector<Observation> data;
    for (Index i = 0; i < setup.observations; ++i) {
      const Index c = pick(rng);
      Vector y = truth.row(c).transpose();
      for (Index r = 0; r < d; ++r) y(r) += setup.noise * noise(rng);
      data.push_back({cells.row(c).transpose(), y});
    }
    const GpPosterior post = condition(prior, data);
    const Matrix mean = predictive_means(post, cells);
    const Matrix sigma = sqrt_rows(marginal_variances(post, cells));
    const double b = beta(cfg, post.size(), delta / static_cast<double>(d));

    double grad = coeffs.norm();
    double hess = 0.0;
    if (v == TestFunction::HalfSquaredNorm) {
      grad = mean.rowwise().norm().maxCoeff();
      hess = 1.0;
    }
    for (Index c = 0; c < m; ++c) {
      const double dev = std::abs(apply(truth.row(c).transpose()) - apply(mean.row(c).transpose()));
      const double s = sigma.row(c).norm();
      const double bound = grad * b * s + 0.5 * hess * b * b * s * s;
      report.worst_margin = std::min(report.worst_margin, bound - dev);
      ++report.probes;
      if (dev <= bound) ++report.covered;
    }
  }
  finish(report, 1.0 - delta - 0.02);
  return report;
}

// ---------------------------------------------------------------------------
// Potential inequalities

PotentialReport check_potential_bounds(const LmcKernel& kernel, double noise, const Matrix& sequence, Index horizon) {
  const Index T = sequence.rows();
  const Index d = kernel.outputs();
  if (T < 1) throw InputError("check_potential_bounds: empty sequence");
  if (horizon < 1) throw InputError("check_potential_bounds: horizon must be at least 1");
  const Vector prior_var = kernel.coregionalization().diagonal() * kernel.base.variance;
  if (prior_var.maxCoeff() > 1.0 + 1e-12) {
    throw ConfigError("check_potential_bounds: per-output prior variance exceeds 1");
  }

  // var[t] = T x d predictive variances at all sequence points after t points.
  std::vector<Matrix> var;
  var.reserve(std::size_t(T + 1));
  GpPosterior post(kernel, noise, sequence.cols());
  post.reserve(T);
  for (Index t = 0; t <= T; ++t) {
    var.push_back(marginal_variances(post, sequence));
    if (t == T) break;
    const Observation obs{sequence.row(t).transpose(), Vector::Zero(d)};
    post = condition(std::move(post), std::span<const Observation>(&obs, 1));
  }
  auto sq = [&](Index t, Index j) { return var[std::size_t(t)].row(j).sum(); };

  PotentialReport r;
  r.length = T;
  r.horizon = horizon;
  r.info_gain = post.info_gain();
  const double L = std::log1p(1.0 / (noise * noise));

  for (Index t = 0; t < T; ++t) r.potential_lhs += sq(t, t);
  r.potential_rhs = 2.0 / L * r.info_gain;
  const double M = coregionalization_eigenvalues(kernel).maxCoeff() * kernel.base.variance;
  r.potential_rhs_spectral = 2.0 * M / std::log1p(M / (noise * noise)) * r.info_gain;

  for (Index t = 0; t < T; ++t) r.delayed_lhs += std::sqrt(std::max(0.0, sq(horizon * (t / horizon), t)));
  for (Index h = 0; h < std::min(horizon, T); ++h) {
    std::vector<Observation> block;
    for (Index t = h; t < T; t += horizon) block.push_back({sequence.row(t).transpose(), Vector::Zero(d)});
    const GpPosterior sub = condition(GpPosterior(kernel, noise, sequence.cols()), block);
    r.block_info_gain = std::max(r.block_info_gain, sub.info_gain());
  }
  const double Tn = static_cast<double>(T);
  const double H2 = static_cast<double>(horizon * horizon);
  r.delayed_rhs = std::sqrt((4.0 * r.info_gain / L) * (Tn + 4.0 * H2 * r.block_info_gain / L));
  r.delayed_rhs_tight = std::sqrt((2.0 * r.info_gain / L) * (Tn + 2.0 * H2 * r.block_info_gain / L));

  r.ratio_margin = std::numeric_limits<double>::infinity();
  r.ratio_margin_scaled = std::numeric_limits<double>::infinity();
  const double inv_noise2 = 1.0 / (noise * noise);
  for (Index tp = 0; tp < T; ++tp) {
    double added = 0.0;  // sum_{j=t'+1}^{t} |sigma_t'(z_j)|^2, 1-based j
    for (Index t = tp + 1; t <= T; ++t) {
      added += sq(tp, t - 1);
      for (Index z = 0; z < T; ++z) {
        const double lhs = sq(tp, z);
        r.ratio_margin = std::min(r.ratio_margin, sq(t, z) * (1.0 + added) - lhs);
        r.ratio_margin_scaled = std::min(r.ratio_margin_scaled, sq(t, z) * (1.0 + inv_noise2 * added) - lhs);
      }
    }
  }
  return r;
}

PotentialSuiteReport run_potential_suite(const PotentialSuiteSpec& spec) {
  if (spec.sequences < 1 || spec.max_length < 1 || spec.max_outputs < 1 || spec.horizons.empty()) {
    throw ConfigError("potential suite needs positive sizes and at least one horizon");
  }
  Rng rng(spec.seed);
  std::uniform_int_distribution<Index> pick_len(1, spec.max_length);
  std::uniform_int_distribution<Index> pick_d(1, spec.max_outputs);
  std::uniform_int_distribution<std::size_t> pick_h(0, spec.horizons.size() - 1);
  std::uniform_int_distribution<int> pick_family(0, 2);
  std::uniform_real_distribution<double> unit;

  PotentialSuiteReport out;
  auto tally = [](PotentialTally& t, bool ok, double margin, bool first) {
    if (ok) ++t.passed;
    t.worst_margin = first ? margin : std::min(t.worst_margin, margin);
  };

  for (Index i = 0; i < spec.sequences; ++i) {
    const Index T = pick_len(rng);
    const Index d = pick_d(rng);
    const Index H = spec.horizons[pick_h(rng)];
    ScalarKernelSpec base;
    base.family = static_cast<KernelFamily>(pick_family(rng));
    base.lengthscale = 0.1 + 0.9 * unit(rng);
    base.variance = 1.0;
    const std::uint64_t mix_seed = rng();
    const LmcKernel kernel =
        spec.correlated
            ? LmcKernel::lmc(base, MixingMatrix::random(d, d, mix_seed).scaled_to_max_diagonal(1.0))
            : LmcKernel::independent(base, d);

    Matrix seq(T, spec.input_dim);
    const bool repeated = unit(rng) < 0.2;
    for (Index t = 0; t < T; ++t)
      for (Index k = 0; k < spec.input_dim; ++k) seq(t, k) = unit(rng);
    if (repeated) {
      for (Index t = 1; t < T; ++t) seq.row(t) = seq.row(0);
    }

    const PotentialReport r = check_potential_bounds(kernel, spec.noise, seq, H);
    const bool first = i == 0;
    tally(out.variance_sum, r.variance_sum(), r.potential_rhs - r.potential_lhs, first);
    tally(out.variance_sum_spectral, r.variance_sum_spectral(), r.potential_rhs_spectral - r.potential_lhs, first);
    tally(out.delayed_sum, r.delayed_sum(), r.delayed_rhs - r.delayed_lhs, first);
    tally(out.delayed_sum_tight, r.delayed_sum_tight(), r.delayed_rhs_tight - r.delayed_lhs, first);
    tally(out.variance_ratio, r.variance_ratio(), r.ratio_margin, first);
    tally(out.variance_ratio_scaled, r.variance_ratio_scaled(), r.ratio_margin_scaled, first);
    ++out.sequences;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace summaries

std::vector<GammaRow> gamma_report(std::span<const RegretTrace> traces, Index horizon) {
  std::map<Index, GammaRow> rows;
  for (const RegretTrace& trace : traces) {
    for (const EpisodeRecord& e : trace.episodes) {
      GammaRow& row = rows[e.episode];
      row.episode = e.episode;
      row.steps = e.episode * horizon;
      row.max_info_gain = row.runs == 0 ? e.info_gain : std::max(row.max_info_gain, e.info_gain);
      row.mean_info_gain += e.info_gain;
      ++row.runs;
    }
  }
  std::vector<GammaRow> out;
  out.reserve(rows.size());
  for (auto& [k, row] : rows) {
    row.mean_info_gain /= static_cast<double>(row.runs);
    out.push_back(row);
  }
  return out;
}

Vector coregionalization_eigenvalues(const LmcKernel& kernel) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(kernel.coregionalization(), Eigen::EigenvaluesOnly).eigenvalues();
}

WidthRatio fit_width_ratio(std::span<const RegretTrace> traces) {
  std::vector<double> ratios;
  for (const RegretTrace& trace : traces)
    for (const EpisodeRecord& e : trace.episodes)
      if (e.xi_sum > 0.0) ratios.push_back(e.inst_regret / e.xi_sum);
  WidthRatio out;
  out.episodes = Index(ratios.size());
  if (ratios.empty()) return out;
  out.fitted_c = std::max(0.0, *std::max_element(ratios.begin(), ratios.end()));
  const auto mid = ratios.begin() + std::ptrdiff_t(ratios.size() / 2);
  std::nth_element(ratios.begin(), mid, ratios.end());
  out.median = *mid;
  if (ratios.size() % 2 == 0) out.median = 0.5 * (out.median + *std::max_element(ratios.begin(), mid));
  return out;
}

std::vector<RegretStep> regret_decomposition(const ValueTables& optimal, const Trajectory& trajectory) {
  const Index H = Index(trajectory.steps.size());
  if (H != optimal.horizon()) throw InputError("regret_decomposition: trajectory length differs from the horizon");
  // Return-to-go of the executed (deterministic) policy.
  Vector to_go = Vector::Zero(H + 1);
  for (Index h = H - 1; h >= 0; --h) to_go(h) = to_go(h + 1) + trajectory.steps[std::size_t(h)].reward;

  std::vector<RegretStep> out(static_cast<std::size_t>(H));
  for (Index h = 0; h < H; ++h) {
    const Transition& t = trajectory.steps[std::size_t(h)];
    RegretStep& r = out[std::size_t(h)];
    r.total = optimal.v(h, t.state) - to_go(h);
    r.immediate = optimal.v(h, t.state) - optimal.q[std::size_t(h)](t.state, t.action);
    r.future = optimal.v(h + 1, t.next_state) - to_go(h + 1);
    r.residual = r.total - r.immediate - r.future;
  }
  return out;
}

}  // namespace rlgps
