#include "rlgps/gp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>

namespace rlgps {

namespace {

constexpr double kNegativeVarianceWarn = 1e-6;

void clamp_variance(double& v) {
  if (v < 0.0) {
    if (v < -kNegativeVarianceWarn) {
      std::cerr << "warning: predicted variance " << v << " clamped to 0\n";
    }
    v = 0.0;
  }
}

Matrix standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

/// Stacked (n*d) vector <-> n x d matrix, output-fastest.
Matrix unstack(const Eigen::Ref<const Vector>& v, Index d) {
  Matrix out(v.size() / d, d);
  for (Index i = 0; i < out.rows(); ++i)
    for (Index r = 0; r < d; ++r) out(i, r) = v(i * d + r);
  return out;
}

Vector stack(const Matrix& m) {
  Vector out(m.size());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index r = 0; r < m.cols(); ++r) out(i * m.cols() + r) = m(i, r);
  return out;
}

std::vector<double> key_of(const Eigen::Ref<const Vector>& p) { return {p.data(), p.data() + p.size()}; }

}  // namespace

// --------------------------------------------------------------------------
// GpPosterior

GpPosterior::GpPosterior(LmcKernel kernel, double noise_std, Index input_dim)
    : kernel_(std::move(kernel)), noise_(noise_std), input_dim_(input_dim) {
  kernel_.base.validate();
  if (!(noise_ > 0.0) || !std::isfinite(noise_)) {
    throw ConfigError("observation noise must be positive, got " + std::to_string(noise_));
  }
  if (input_dim_ < 1) throw ConfigError("GP input dimension must be at least 1");
}

Matrix GpPosterior::cholesky_factor() const {
  Matrix out = Matrix::Zero(stacked_size(), stacked_size());
  out.triangularView<Eigen::Lower>() = cholesky();
  return out;
}

Matrix GpPosterior::solve(const Matrix& rhs) const {
  if (rhs.rows() != stacked_size()) throw InputError("GpPosterior::solve: dimension mismatch");
  if (stacked_size() == 0) return rhs;
  Matrix tmp = cholesky().solve(rhs);
  return cholesky().transpose().solve(tmp);
}

void GpPosterior::reserve(Index points) { ensure_capacity(points); }

void GpPosterior::ensure_capacity(Index points) {
  const Index capacity = inputs_.rows();
  if (points <= capacity) return;
  const Index d = outputs();
  const Index next = std::max({points, 2 * capacity, Index(16)});
  const Index used = stacked_size();

  Matrix inputs(next, input_dim_);
  inputs.topRows(n_) = inputs_.topRows(n_);
  Vector y(next * d);
  y.head(used) = y_.head(used);
  Matrix factor(next * d, next * d);
  factor.topLeftCorner(used, used) = factor_.topLeftCorner(used, used);
  Vector weights(next * d);
  weights.head(used) = weights_.head(used);

  inputs_ = std::move(inputs);
  y_ = std::move(y);
  factor_ = std::move(factor);
  weights_ = std::move(weights);
}

Matrix BatchUpdate::marginal_variances() const {
  const Index d = posterior.outputs();
  Matrix out = unstack(prior_cov.diagonal(), d);
  for (Index i = 0; i < out.size(); ++i) clamp_variance(out.data()[i]);
  return out;
}

BatchUpdate condition_tracked(GpPosterior post, std::span<const Observation> batch) {
  const Index d = post.outputs();
  const Index b = static_cast<Index>(batch.size());
  if (b == 0) return BatchUpdate{std::move(post), Matrix(0, 0)};

  Matrix new_inputs(b, post.input_dim_);
  Vector new_y(b * d);
  for (Index i = 0; i < b; ++i) {
    const Observation& obs = batch[static_cast<std::size_t>(i)];
    if (obs.input.size() != post.input_dim_) throw InputError("condition: observation input has wrong dimension");
    if (obs.output.size() != d) throw InputError("condition: observation output has wrong dimension");
    new_inputs.row(i) = obs.input.transpose();
    new_y.segment(i * d, d) = obs.output;
  }

  const Index n = post.n_;
  const Index N = n * d;
  const Index B = b * d;
  post.ensure_capacity(n + b);

  const Matrix& coreg = post.kernel_.coregionalization();
  Matrix cov = block_expand(base_gram(post.kernel_.base, new_inputs), coreg);
  if (N > 0) {
    const Matrix cross = block_expand(base_cross(post.kernel_.base, post.inputs_.topRows(n), new_inputs), coreg);
    Matrix x = post.factor_.topLeftCorner(N, N).triangularView<Eigen::Lower>().solve(cross);
    post.factor_.block(N, 0, B, N) = x.transpose();
    cov.noalias() -= x.transpose() * x;
  }
  Matrix prior_cov = 0.5 * (cov + cov.transpose());

  Matrix s = prior_cov;
  s.diagonal().array() += post.noise_ * post.noise_;
  const Index pivot = cholesky_in_place(s);
  if (pivot >= 0) {
    throw NumericalError("condition: Cholesky block append broke down", N + pivot);
  }
  auto block = post.factor_.block(N, N, B, B);
  block.setZero();
  block.triangularView<Eigen::Lower>() = s.triangularView<Eigen::Lower>();

  post.info_gain_ += block.diagonal().array().log().sum() - static_cast<double>(B) * std::log(post.noise_);
  post.inputs_.middleRows(n, b) = new_inputs;
  post.y_.segment(N, B) = new_y;
  post.n_ = n + b;
  post.weights_.head(N + B) = post.solve(post.y_.head(N + B));
  return BatchUpdate{std::move(post), std::move(prior_cov)};
}

GpPosterior condition(GpPosterior post, std::span<const Observation> batch) {
  return condition_tracked(std::move(post), batch).posterior;
}

// --------------------------------------------------------------------------
// Prediction

Prediction predict_joint(const GpPosterior& post, const Matrix& points) {
  if (points.cols() != post.input_dim()) throw InputError("predict: point has wrong dimension");
  const LmcKernel& kern = post.kernel();
  Prediction out;
  out.cov = kernel_matrix(kern, points);
  if (post.size() == 0) {
    out.mean = Vector::Zero(points.rows() * post.outputs());
  } else {
    const Matrix cross = block_expand(base_cross(kern.base, post.inputs(), points), kern.coregionalization());
    out.mean = cross.transpose() * post.weights();
    const Matrix v = post.cholesky().solve(cross);
    out.cov.noalias() -= v.transpose() * v;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  }
  for (Index i = 0; i < out.cov.rows(); ++i) clamp_variance(out.cov(i, i));
  return out;
}

Prediction predict(const GpPosterior& post, const Vector& z) {
  if (z.size() != post.input_dim()) throw InputError("predict: point has wrong dimension");
  return predict_joint(post, z.transpose());
}

Matrix marginal_variances(const GpPosterior& post, const Matrix& points) {
  if (points.cols() != post.input_dim()) throw InputError("marginal_variances: point has wrong dimension");
  const LmcKernel& kern = post.kernel();
  const Index d = post.outputs();
  const Vector prior = kern.coregionalization().diagonal() * kern.base.variance;
  Matrix out(points.rows(), d);
  for (Index i = 0; i < points.rows(); ++i) out.row(i) = prior.transpose();
  if (post.size() == 0) return out;

  constexpr Index kChunk = 128;
  for (Index start = 0; start < points.rows(); start += kChunk) {
    const Index len = std::min(kChunk, points.rows() - start);
    const Matrix cross =
        block_expand(base_cross(kern.base, post.inputs(), points.middleRows(start, len)), kern.coregionalization());
    const Matrix v = post.cholesky().solve(cross);
    const Vector reduction = v.colwise().squaredNorm().transpose();
    for (Index i = 0; i < len; ++i)
      for (Index r = 0; r < d; ++r) out(start + i, r) -= reduction(i * d + r);
  }
  for (Index i = 0; i < out.size(); ++i) clamp_variance(out.data()[i]);
  return out;
}

Vector marginal_std(const GpPosterior& post, const Vector& z) {
  return predict(post, z).cov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

double info_gain(const GpPosterior& post) { return post.info_gain(); }

void ConfidenceConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(beta_scale >= 0.0)) throw ConfigError("beta_scale must be nonnegative");
  if (!(grad_bound >= 0.0) || !(hess_bound >= 0.0)) throw ConfigError("u_G and u_H must be nonnegative");
}

double beta(const ConfidenceConfig& cfg, Index n, double delta_eff) {
  if (!(delta_eff > 0.0 && delta_eff < 1.0)) throw ConfigError("effective delta must lie in (0, 1)");
  const double count = static_cast<double>(std::max<Index>(n, 2));
  return cfg.beta_scale * std::sqrt(2.0 * std::log(count / delta_eff));
}

// --------------------------------------------------------------------------
// Factorizations

Index cholesky_in_place(Eigen::Ref<Matrix> m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) {
    m.triangularView<Eigen::Lower>() = llt.matrixL();
    return -1;
  }
  // Unblocked pass to locate the failing pivot.
  const Index n = m.rows();
  for (Index j = 0; j < n; ++j) {
    const double diag = m(j, j) - m.row(j).head(j).squaredNorm();
    if (!(diag > 0.0) || !std::isfinite(diag)) return j;
    m(j, j) = std::sqrt(diag);
    for (Index i = j + 1; i < n; ++i) {
      m(i, j) = (m(i, j) - m.row(i).head(j).dot(m.row(j).head(j))) / m(j, j);
    }
  }
  return -1;
}

Matrix jittered_cholesky(const Matrix& m) {
  const Index n = m.rows();
  if (n == 0) return Matrix(0, 0);
  const double scale = std::max(m.diagonal().cwiseAbs().mean(), 1e-300);
  for (double jitter = 1e-10; jitter <= 1e-3; jitter *= 10.0) {
    Matrix shifted = m;
    shifted.diagonal().array() += jitter * scale;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericalError("jittered_cholesky: matrix is not positive semidefinite", 0);
}

// --------------------------------------------------------------------------
// Sampling

GridSampler::GridSampler(LmcKernel kernel, Matrix grid) : kernel_(std::move(kernel)), grid_(std::move(grid)) {
  if (grid_.rows() == 0) throw InputError("GridSampler: empty grid");
  if (grid_.rows() * kernel_.outputs() <= kExactSamplingCapacity) {
    gram_ = base_gram(kernel_.base, grid_);
    factor_ = jittered_cholesky(gram_);
  }
  for (Index i = 0; i < grid_.rows(); ++i) cell_index_.emplace(key_of(grid_.row(i).transpose()), i);
}

std::vector<Index> GridSampler::locate(const Matrix& points) const {
  std::vector<Index> out(static_cast<std::size_t>(points.rows()), -1);
  for (Index i = 0; i < points.rows(); ++i) {
    auto it = cell_index_.find(key_of(points.row(i).transpose()));
    if (it != cell_index_.end()) out[static_cast<std::size_t>(i)] = it->second;
  }
  return out;
}

Matrix GridSampler::sample_values(const GpPosterior& post, const SamplingSpec& spec, Rng& rng) const {
  if (post.input_dim() != grid_.cols()) throw InputError("sample: grid dimension does not match the posterior");
  if (post.outputs() != kernel_.outputs()) throw InputError("sample: output dimension does not match the sampler");
  if (spec.mode == SamplingMode::Exact) {
    if (grid_.rows() * post.outputs() > kExactSamplingCapacity) {
      throw CapacityError("exact sampling on " + std::to_string(grid_.rows()) + " cells x " +
                          std::to_string(post.outputs()) + " outputs exceeds the capacity of " +
                          std::to_string(kExactSamplingCapacity) + "; use nystrom sampling");
    }
    return sample_exact(post, rng);
  }
  return sample_nystrom(post, spec.inducing, rng);
}

SampledModel GridSampler::sample(const GpPosterior& post, const SamplingSpec& spec, Rng& rng) const {
  SampledModel out;
  out.values = sample_values(post, spec, rng);
  if (out.values.cols() > 1) {
    out.values.rightCols(out.values.cols() - 1) = out.values.rightCols(out.values.cols() - 1).cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

Matrix GridSampler::sample_exact(const GpPosterior& post, Rng& rng) const {
  const Index m = grid_.rows();
  const Index d = post.outputs();
  const Index n = post.size();
  const Matrix& alpha = kernel_.mixing.weights();
  const Matrix& coreg = kernel_.coregionalization();
  const Matrix train = post.inputs();
  const std::vector<Index> where = locate(train);

  // Training inputs that are not grid cells join the joint prior draw.
  std::vector<Index> column(static_cast<std::size_t>(n));
  std::map<std::vector<double>, Index> extra_index;
  std::vector<Index> extra_rows;
  for (Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    if (where[si] >= 0) {
      column[si] = where[si];
      continue;
    }
    auto [it, inserted] = extra_index.emplace(key_of(train.row(i).transpose()), m + Index(extra_rows.size()));
    if (inserted) extra_rows.push_back(i);
    column[si] = it->second;
  }

  const Index total = m + Index(extra_rows.size());
  Matrix gram;
  Matrix factor_storage;
  const Matrix* factor = nullptr;
  if (extra_rows.empty()) {
    factor = &factor_;
  } else {
    Matrix points(total, grid_.cols());
    points.topRows(m) = grid_;
    for (std::size_t e = 0; e < extra_rows.size(); ++e) points.row(m + Index(e)) = train.row(extra_rows[e]);
    gram = base_gram(kernel_.base, points);
    factor_storage = jittered_cholesky(gram);
    factor = &factor_storage;
  }

  const Matrix latent = factor->triangularView<Eigen::Lower>() * standard_normal(total, alpha.cols(), rng);
  Matrix prior = latent * alpha.transpose();  // total x d
  if (n == 0) return prior.topRows(m);

  const Matrix noise = standard_normal(n, d, rng) * post.noise_std();
  Vector residual(n * d);
  for (Index i = 0; i < n; ++i)
    for (Index r = 0; r < d; ++r)
      residual(i * d + r) = post.stacked_outputs()(i * d + r) - prior(column[std::size_t(i)], r) - noise(i, r);
  const Matrix w = unstack(post.solve(residual), d);

  Matrix cross(m, n);  // base kernel between grid cells and training inputs
  for (Index i = 0; i < n; ++i) {
    const Index c = column[std::size_t(i)];
    if (c < m) {
      cross.col(i) = gram_.col(c);
    } else {
      cross.col(i) = base_cross(kernel_.base, grid_, train.row(i));
    }
  }
  return prior.topRows(m) + cross * w * coreg;
}

Matrix GridSampler::sample_nystrom(const GpPosterior& post, Index inducing, Rng& rng) const {
  const Index m = grid_.rows();
  const Index d = post.outputs();
  if (inducing < 1 || inducing > m) {
    throw ConfigError("nystrom sampling needs 1 <= inducing <= grid size (" + std::to_string(m) + ")");
  }
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index(0));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(inducing));
  std::sort(order.begin(), order.end());
  Matrix u_points(inducing, grid_.cols());
  for (Index j = 0; j < inducing; ++j) u_points.row(j) = grid_.row(order[std::size_t(j)]);

  const Prediction joint = predict_joint(post, u_points);
  const Matrix factor = jittered_cholesky(joint.cov);
  const Vector xi = standard_normal(inducing * d, 1, rng);
  // Conditional-mean extension: f(x) = mu(x) + Sigma_xU Sigma_UU^{-1} (f_U - mu_U),
  // with Sigma_UU^{-1} (f_U - mu_U) = F^{-T} xi.
  const Vector w_stacked = factor.transpose().triangularView<Eigen::Upper>().solve(xi);
  const Matrix w = unstack(w_stacked, d);
  const Matrix& coreg = kernel_.coregionalization();

  Matrix grid_u;
  if (gram_.size() > 0) {
    grid_u.resize(m, inducing);
    for (Index j = 0; j < inducing; ++j) grid_u.col(j) = gram_.col(order[std::size_t(j)]);
  } else {
    grid_u = base_cross(kernel_.base, grid_, u_points);
  }
  Matrix out = grid_u * w * coreg;
  if (post.size() == 0) return out;

  const Matrix train = post.inputs();
  const Matrix train_u = base_cross(kernel_.base, train, u_points);
  const Vector u = stack(train_u * w * coreg);
  const Matrix correction = unstack(Vector(post.weights()) - post.solve(u), d);
  out += base_cross(kernel_.base, grid_, train) * correction * coreg;
  return out;
}

SampledModel sample_on_grid(const GpPosterior& post, const Matrix& grid, const SamplingSpec& spec, Rng& rng) {
  GridSampler sampler(post.kernel(), grid);
  return sampler.sample(post, spec, rng);
}

// --------------------------------------------------------------------------
// Snapshots

namespace {

constexpr char kMagic[8] = {'R', 'L', 'G', 'P', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kSnapshotVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("snapshot: truncated input");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_snapshot(std::ostream& out, const GpPosterior& post) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kSnapshotVersion);
  put<std::int64_t>(out, post.size());
  put<std::int64_t>(out, post.outputs());
  put<std::int64_t>(out, post.input_dim());
  put<double>(out, post.noise_std());
  const Matrix inputs = post.inputs();
  for (Index i = 0; i < inputs.rows(); ++i)
    for (Index j = 0; j < inputs.cols(); ++j) put<double>(out, inputs(i, j));
  for (Index i = 0; i < post.stacked_size(); ++i) put<double>(out, post.stacked_outputs()(i));
  if (!out) throw IoError("snapshot: write failed");
}

Snapshot read_snapshot(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("snapshot: bad magic");
  }
  if (get<std::uint32_t>(in) != kSnapshotVersion) throw IoError("snapshot: unsupported version");
  Snapshot snap;
  snap.points = get<std::int64_t>(in);
  snap.outputs = get<std::int64_t>(in);
  const Index dim = get<std::int64_t>(in);
  snap.noise_std = get<double>(in);
  if (snap.points < 0 || snap.outputs < 1 || dim < 1) throw IoError("snapshot: corrupt header");
  snap.inputs.resize(snap.points, dim);
  for (Index i = 0; i < snap.points; ++i)
    for (Index j = 0; j < dim; ++j) snap.inputs(i, j) = get<double>(in);
  snap.stacked_outputs.resize(snap.points * snap.outputs);
  for (Index i = 0; i < snap.stacked_outputs.size(); ++i) snap.stacked_outputs(i) = get<double>(in);
  return snap;
}

}  // namespace rlgps
