#include "nsc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nsc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_2cosh(double a) {
  const double m = std::abs(a);
  return m + std::log1p(std::exp(-2.0 * m));
}

}  // namespace

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

SampleMatrix ScoreField::score_batch(const SampleMatrix& x) const {
  SampleMatrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.row(i) = score(x.row(i).transpose()).transpose();
  }
  return out;
}

SampleMatrix ScoreField::sample(std::size_t, Rng&) const {
  throw std::logic_error("distribution cannot be sampled");
}

double ScoreField::log_density(const Vector&) const {
  throw std::logic_error("distribution has no tractable log-density");
}

// ---------------------------------------------------------------------------
// GaussianMixture

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                                 std::vector<Matrix> covariances)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      covariances_(std::move(covariances)) {
  const std::size_t k = weights_.size();
  if (k == 0 || means_.size() != k || covariances_.size() != k) {
    throw std::invalid_argument("mixture: weights, means and covariances must have equal nonzero length");
  }
  dim_ = static_cast<int>(means_[0].size());
  if (dim_ < 1) throw std::invalid_argument("mixture: dimension must be positive");

  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("mixture: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights must sum to 1");

  double running = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const Matrix& cov = covariances_[c];
    if (means_[c].size() != dim_ || cov.rows() != dim_ || cov.cols() != dim_) {
      throw std::invalid_argument("mixture: inconsistent component dimensions");
    }
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("mixture: covariance is not symmetric");
    }
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("mixture: covariance is not positive definite");
    }
    Matrix lower = llt.matrixL();
    Matrix precision = llt.solve(Matrix::Identity(dim_, dim_));
    precision = 0.5 * (precision + precision.transpose());
    if ((precision * cov - Matrix::Identity(dim_, dim_)).cwiseAbs().maxCoeff() > 1e-8) {
      throw std::invalid_argument("mixture: covariance is too ill-conditioned");
    }
    const double log_det = 2.0 * lower.diagonal().array().log().sum();
    cholesky_.push_back(std::move(lower));
    precisions_.push_back(std::move(precision));
    log_norm_.push_back(-0.5 * (dim_ * kLog2Pi + log_det));
    log_weights_.push_back(std::log(weights_[c]));
    running += weights_[c];
    cumulative_.push_back(running);
  }
  cumulative_.back() = 1.0;
}

Vector GaussianMixture::component_log_terms(const Vector& x) const {
  Vector terms(weights_.size());
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    const Vector diff = x - means_[c];
    terms[c] = log_weights_[c] + log_norm_[c] - 0.5 * diff.dot(precisions_[c] * diff);
  }
  return terms;
}

double GaussianMixture::log_density(const Vector& x) const {
  return log_sum_exp(component_log_terms(x));
}

Vector GaussianMixture::score(const Vector& x) const {
  const Vector terms = component_log_terms(x);
  const double lse = log_sum_exp(terms);
  Vector s = Vector::Zero(dim_);
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    const double r = std::exp(terms[c] - lse);
    if (r == 0.0) continue;
    s.noalias() += r * (precisions_[c] * (means_[c] - x));
  }
  return s;
}

SampleMatrix GaussianMixture::sample_labeled(std::size_t n, Rng& rng, std::vector<int>& labels) const {
  SampleMatrix out(static_cast<Eigen::Index>(n), dim_);
  labels.resize(n);
  Vector z(dim_);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    std::size_t c = 0;
    while (c + 1 < cumulative_.size() && (u >= cumulative_[c] || weights_[c] == 0.0)) ++c;
    for (int j = 0; j < dim_; ++j) z[j] = standard_normal(rng);
    out.row(static_cast<Eigen::Index>(i)) = (means_[c] + cholesky_[c] * z).transpose();
    labels[i] = static_cast<int>(c);
  }
  return out;
}

SampleMatrix GaussianMixture::sample(std::size_t n, Rng& rng) const {
  std::vector<int> labels;
  return sample_labeled(n, rng, labels);
}

MixturePair make_benchmark_mixture(int d, double rho1, double omega) {
  if (d < 2) throw std::invalid_argument("benchmark mixture: d must be at least 2");
  if (!(omega > 0.0)) throw std::invalid_argument("benchmark mixture: omega must be positive");
  const double rho2 = 0.0 - rho1;

  const Vector mu1 = Vector::Zero(d);
  const Vector mu2 = Vector::Constant(d, 0.5);
  const Matrix eye = Matrix::Identity(d, d);

  Matrix cov1 = eye;
  cov1(0, 1) = cov1(1, 0) = rho1;
  Matrix cov2 = eye;
  cov2(0, 0) = omega * omega;
  cov2(0, 1) = cov2(1, 0) = omega * rho2;

  return MixturePair{
      GaussianMixture({0.5, 0.5}, {mu1, mu2}, {cov1, cov2}),
      GaussianMixture({0.5, 0.5}, {mu1, mu2}, {eye, eye}),
  };
}

MixturePair make_1d_pair() {
  auto scalar = [](double v) { return Vector::Constant(1, v); };
  auto var = [](double v) { return Matrix::Constant(1, 1, v); };
  return MixturePair{
      GaussianMixture({0.5, 0.5}, {scalar(-0.8), scalar(1.0)}, {var(1.0), var(0.25)}),
      GaussianMixture({0.5, 0.5}, {scalar(-1.0), scalar(1.0)}, {var(1.0), var(1.0)}),
  };
}

// ---------------------------------------------------------------------------
// GaussBernoulliRBM

GaussBernoulliRBM::GaussBernoulliRBM(Matrix coupling, Vector visible_bias, Vector hidden_bias,
                                     int default_gibbs_sweeps)
    : B_(std::move(coupling)),
      b_(std::move(visible_bias)),
      c_(std::move(hidden_bias)),
      gibbs_sweeps_(default_gibbs_sweeps) {
  if (B_.rows() != b_.size() || B_.cols() != c_.size() || b_.size() < 1) {
    throw std::invalid_argument("rbm: coupling must be d x H with matching biases");
  }
  if (gibbs_sweeps_ < 1) throw std::invalid_argument("rbm: gibbs sweeps must be >= 1");
  if (has_log_density()) {
    // Z = Σ_h (2π)^{d/2} exp(½|Bh + b|² + cᵀh)
    const int H = hidden();
    const std::uint64_t states = 1ULL << H;
    Vector terms(static_cast<Eigen::Index>(states));
    Vector h(H);
    for (std::uint64_t s = 0; s < states; ++s) {
      for (int j = 0; j < H; ++j) h[j] = ((s >> j) & 1ULL) ? 1.0 : -1.0;
      const Vector m = B_ * h + b_;
      terms[static_cast<Eigen::Index>(s)] = 0.5 * m.squaredNorm() + c_.dot(h);
    }
    log_partition_ = 0.5 * dim() * kLog2Pi + log_sum_exp(terms);
  }
}

Vector GaussBernoulliRBM::score(const Vector& x) const {
  const Vector a = (B_.transpose() * x + c_).array().tanh().matrix();
  return b_ - x + B_ * a;
}

SampleMatrix GaussBernoulliRBM::score_batch(const SampleMatrix& x) const {
  Matrix a = (x * B_).rowwise() + c_.transpose();
  a = a.array().tanh().matrix();
  SampleMatrix out = (-x).rowwise() + b_.transpose();
  out.noalias() += a * B_.transpose();
  return out;
}

double GaussBernoulliRBM::log_density(const Vector& x) const {
  if (!has_log_density()) ScoreField::log_density(x);
  const Vector a = B_.transpose() * x + c_;
  double acc = -0.5 * x.squaredNorm() + b_.dot(x);
  for (Eigen::Index j = 0; j < a.size(); ++j) acc += log_2cosh(a[j]);
  return acc - log_partition_;
}

SampleMatrix GaussBernoulliRBM::sample(std::size_t n, int sweeps, Rng& rng) const {
  if (sweeps < 1) throw std::invalid_argument("rbm: gibbs sweeps must be >= 1");
  const int d = dim();
  const int H = hidden();
  SampleMatrix out(static_cast<Eigen::Index>(n), d);
  Vector x(d), h(H);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x[j] = b_[j] + standard_normal(rng);
    for (int s = 0; s < sweeps; ++s) {
      const Vector a = B_.transpose() * x + c_;
      for (int j = 0; j < H; ++j) {
        const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * a[j]));
        h[j] = uniform01(rng) < p_plus ? 1.0 : -1.0;
      }
      const Vector mean = B_ * h + b_;
      for (int j = 0; j < d; ++j) x[j] = mean[j] + standard_normal(rng);
    }
    out.row(static_cast<Eigen::Index>(i)) = x.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// OptimalCritic

OptimalCritic::OptimalCritic(ScoreFieldPtr p, ScoreFieldPtr q) : p_(std::move(p)), q_(std::move(q)) {
  if (!p_ || !q_) throw std::invalid_argument("optimal critic: null distribution");
  if (p_->dim() != q_->dim()) throw std::invalid_argument("optimal critic: dimension mismatch");
}

Vector OptimalCritic::operator()(const Vector& x) const {
  if (p_ == q_) return Vector::Zero(x.size());
  return q_->score(x) - p_->score(x);
}

SampleMatrix OptimalCritic::batch(const SampleMatrix& x) const {
  if (p_ == q_) return SampleMatrix::Zero(x.rows(), x.cols());
  return q_->score_batch(x) - p_->score_batch(x);
}

}  // namespace nsc
