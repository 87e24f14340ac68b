#include "rlgps/agent.hpp"

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

namespace rlgps {

void RunConfig::validate() const {
  if (episodes < 1) throw ConfigError("episodes must be at least 1");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (!(noise > 0.0)) throw ConfigError("noise must be positive");
  if (sampling.mode == SamplingMode::Nystrom && sampling.inducing < 1) {
    throw ConfigError("nystrom sampling needs at least one inducing point");
  }
  kernel.base.validate();
  confidence.validate();
}

ModelTables model_tables(const TabularMdp& mdp, const Matrix& values) {
  const Index S = mdp.num_states();
  const Index A = mdp.num_actions();
  if (values.rows() != S * A || values.cols() != mdp.output_dim()) {
    throw InputError("model_tables: sampled values have wrong shape");
  }
  ModelTables out{Matrix(S, A), IndexMatrix(S, A)};
  for (Index s = 0; s < S; ++s)
    for (Index a = 0; a < A; ++a) {
      const Index c = mdp.cell(s, a);
      out.reward(s, a) = values(c, 0);
      out.next(s, a) = mdp.snap_state(values.row(c).tail(mdp.state_dims()).transpose());
    }
  return out;
}

Observation observe(const TabularMdp& mdp, const Transition& t) {
  Observation obs;
  obs.input = mdp.input_point(t.state, t.action);
  obs.output.resize(mdp.output_dim());
  obs.output(0) = t.reward;
  obs.output.tail(mdp.state_dims()) = mdp.state_points.row(t.next_state).transpose();
  return obs;
}

RunResult run(const RunConfig& cfg, const TabularMdp& mdp) {
  cfg.validate();
  mdp.validate();
  if (cfg.horizon != mdp.horizon) {
    throw ConfigError("run: horizon " + std::to_string(cfg.horizon) + " differs from the MDP horizon " +
                      std::to_string(mdp.horizon));
  }
  if (cfg.kernel.outputs() != mdp.output_dim()) {
    throw ConfigError("run: kernel has " + std::to_string(cfg.kernel.outputs()) + " outputs, the MDP needs " +
                      std::to_string(mdp.output_dim()));
  }

  using Clock = std::chrono::steady_clock;
  const Index H = cfg.horizon;
  const Index T = cfg.total_steps();
  const Index d = mdp.output_dim();
  const ValueTables optimal = optimal_values(mdp);

  std::optional<GridSampler> sampler;
  if (cfg.policy == Policy::PosteriorSampling) sampler.emplace(cfg.kernel, mdp.input_points());

  GpPosterior post(cfg.kernel, cfg.noise, mdp.input_dim());
  post.reserve(T);
  Rng rng(cfg.seed);

  RegretTrace trace{cfg.seed, {}};
  std::vector<Transition> buffer;
  trace.episodes.reserve(std::size_t(cfg.episodes));
  buffer.reserve(std::size_t(T));
  double cumulative = 0.0;
  std::vector<Observation> batch(static_cast<std::size_t>(H));

  for (Index k = 0; k < cfg.episodes; ++k) {
    const auto t0 = Clock::now();
    if (post.size() != k * H) {
      throw std::logic_error("delayed update violated: posterior holds " + std::to_string(post.size()) +
                             " points in episode " + std::to_string(k + 1));
    }
    EpisodeRecord rec;
    rec.episode = k + 1;
    rec.posterior_points = post.size();

    ValueTables proxy;
    if (cfg.policy == Policy::Oracle) {
      proxy = optimal;
    } else {
      const SampledModel model = sampler->sample(post, cfg.sampling, rng);
      const ModelTables tables = model_tables(mdp, model.values);
      proxy = backward_induction(tables.reward, tables.next, H);
    }

    const Index start = mdp.sample_start(rng);
    const Trajectory traj = rollout(mdp, proxy, start);
    for (Index h = 0; h < H; ++h) {
      const Transition& t = traj.steps[std::size_t(h)];
      batch[std::size_t(h)] = observe(mdp, t);
      buffer.push_back(t);
    }

    BatchUpdate update = condition_tracked(std::move(post), batch);
    const Matrix var = update.marginal_variances();
    const double b = width_beta(cfg.confidence, k * H, T, d);
    for (Index h = 0; h < H; ++h) rec.xi_sum += xi_from_std(var.row(h).transpose().cwiseSqrt(), b, cfg.confidence);
    post = std::move(update.posterior);

    rec.start_cell = mdp.lattice_of_state[std::size_t(start)];
    rec.v_star = optimal.v(0, start);
    rec.achieved = traj.total_return;
    rec.inst_regret = rec.v_star - rec.achieved;
    cumulative += rec.inst_regret;
    rec.cum_regret = cumulative;
    rec.info_gain = post.info_gain();
    if (cfg.timing) rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    trace.episodes.push_back(rec);
  }
  return RunResult{std::move(trace), std::move(buffer), std::move(post)};
}

RunResult run_h1_bandit(const RunConfig& cfg, const TabularMdp& mdp) {
  if (mdp.horizon != 1 || cfg.horizon != 1) throw ConfigError("bandit runs need horizon 1");
  if (mdp.num_states() != 1) throw ConfigError("bandit runs need a single state");
  return run(cfg, mdp);
}

}  // namespace rlgps
