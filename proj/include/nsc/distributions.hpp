#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "nsc/rng.hpp"

namespace nsc {

/// A distribution on R^d known through its score function ∇ log density.
/// Implementations are immutable after construction.
class ScoreField {
 public:
  virtual ~ScoreField() = default;

  virtual int dim() const = 0;
  virtual Vector score(const Vector& x) const = 0;
  /// Row i of the result is score(X.row(i)).
  virtual SampleMatrix score_batch(const SampleMatrix& x) const;

  virtual bool can_sample() const { return false; }
  virtual SampleMatrix sample(std::size_t n, Rng& rng) const;

  virtual bool has_log_density() const { return false; }
  virtual double log_density(const Vector& x) const;
};

using ScoreFieldPtr = std::shared_ptr<const ScoreField>;

/// Finite mixture of full-covariance Gaussians.
class GaussianMixture final : public ScoreField {
 public:
  /// Throws std::invalid_argument if the weights are not a probability vector
  /// or a covariance is not symmetric positive definite.
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                  std::vector<Matrix> covariances);

  int dim() const override { return dim_; }
  std::size_t components() const { return weights_.size(); }

  Vector score(const Vector& x) const override;
  bool can_sample() const override { return true; }
  SampleMatrix sample(std::size_t n, Rng& rng) const override;
  bool has_log_density() const override { return true; }
  double log_density(const Vector& x) const override;

  /// Samples together with the index of the component each row came from.
  SampleMatrix sample_labeled(std::size_t n, Rng& rng, std::vector<int>& labels) const;

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& covariances() const { return covariances_; }
  const std::vector<Matrix>& precisions() const { return precisions_; }

 private:
  /// log w_k + log N(x; mu_k, Sigma_k) for every component.
  Vector component_log_terms(const Vector& x) const;

  int dim_ = 0;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<double> cumulative_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  std::vector<Matrix> cholesky_;  // lower factors
  std::vector<Matrix> precisions_;
  std::vector<double> log_norm_;  // -0.5 (d log 2pi + log det Sigma_k)
};

struct MixturePair {
  GaussianMixture p;
  GaussianMixture q;
};

/// The bimodal benchmark pair: q has equally weighted identity-covariance
/// components at 0 and 0.5·1; p perturbs the leading 2×2 covariance blocks
/// with shift rho1 (component 1) and -rho1 scaled by omega (component 2).
MixturePair make_benchmark_mixture(int d, double rho1, double omega);

/// The 1D pair used for the illustrative critic: q = ½N(-1,1) + ½N(1,1),
/// p = ½N(-0.8,1) + ½N(1,0.25).
MixturePair make_1d_pair();

/// Gauss-Bernoulli RBM with latent h ∈ {-1,+1}^H and energy
/// E(x,h) = -xᵀBh - bᵀx - cᵀh + ½|x|².
class GaussBernoulliRBM final : public ScoreField {
 public:
  GaussBernoulliRBM(Matrix coupling, Vector visible_bias, Vector hidden_bias,
                    int default_gibbs_sweeps = 100);

  int dim() const override { return static_cast<int>(b_.size()); }
  int hidden() const { return static_cast<int>(c_.size()); }

  /// b - x + B tanh(Bᵀx + c).
  Vector score(const Vector& x) const override;
  SampleMatrix score_batch(const SampleMatrix& x) const override;

  bool can_sample() const override { return true; }
  SampleMatrix sample(std::size_t n, Rng& rng) const override {
    return sample(n, gibbs_sweeps_, rng);
  }
  /// n independent block-Gibbs chains started from N(b, I); each returns its
  /// state after `sweeps` sweeps.
  SampleMatrix sample(std::size_t n, int sweeps, Rng& rng) const;

  /// Exact normalized log-density; enumerates the 2^H latent states for the
  /// partition function, so only available for H <= 20.
  bool has_log_density() const override { return c_.size() <= 20; }
  double log_density(const Vector& x) const override;

  const Matrix& coupling() const { return B_; }
  const Vector& visible_bias() const { return b_; }
  const Vector& hidden_bias() const { return c_; }

 private:
  Matrix B_;
  Vector b_;
  Vector c_;
  int gibbs_sweeps_;
  double log_partition_ = 0.0;
};

/// f* = s_q - s_p, the scaleless optimal critic.
class OptimalCritic {
 public:
  OptimalCritic(ScoreFieldPtr p, ScoreFieldPtr q);

  Vector operator()(const Vector& x) const;
  SampleMatrix batch(const SampleMatrix& x) const;

  const ScoreField& p() const { return *p_; }
  const ScoreField& q() const { return *q_; }

 private:
  ScoreFieldPtr p_;
  ScoreFieldPtr q_;
};

/// Numerically stable log Σ exp(v).
double log_sum_exp(const Vector& v);

}  // namespace nsc
