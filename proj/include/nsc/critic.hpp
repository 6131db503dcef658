#pragma once

#include <optional>
#include <stdexcept>

#include "nsc/distributions.hpp"
#include "nsc/rng.hpp"

namespace nsc {

/// Flat parameter vector. Packing order is layer-major and row-major within a
/// matrix: W1 (h×d), b1 (h), W2 (h×h), b2 (h), W3 (d×h), b3 (d).
using ParamVector = Vector;

struct Layers {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;

  static Layers zeros(int d, int h);
  int dim() const { return static_cast<int>(w1.cols()); }
  int width() const { return static_cast<int>(w1.rows()); }
};

std::size_t param_count(int d, int h);
ParamVector pack(const Layers& layers);
Layers unpack(const ParamVector& params, int d, int h);

/// How the divergence ∇·f is evaluated.
struct DivMode {
  enum class Kind { kExact, kHutchinson };
  Kind kind = Kind::kExact;
  int probes = 1;

  static DivMode exact() { return {}; }
  static DivMode hutchinson(int k) { return {Kind::kHutchinson, k}; }
  bool is_exact() const { return kind == Kind::kExact; }
};

/// Exact below this dimension, single-probe Hutchinson above.
inline constexpr int kExactDivergenceMaxDim = 32;
DivMode default_div_mode(int d);

/// Draws `probes` Rademacher directions per sample: a d × (m·probes) matrix
/// whose column block i belongs to sample i.
Matrix draw_probes(int d, Eigen::Index m, int probes, Rng& rng);

/// Thrown when a loss or gradient evaluation produces a non-finite value.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Swish activation s(z) = z·sigmoid(z) and its first two derivatives.
double swish(double z);
double swish_d1(double z);
double swish_d2(double z);

/// Outputs and divergences on a batch.
struct CriticEval {
  SampleMatrix f;  // n×d
  Vector div;      // n
};

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// f(x, θ) = W3 s(W2 s(W1 x + b1) + b2) + b3, optionally minus the output of a
/// frozen reference copy of the parameters (zero-output start).
class MlpCritic {
 public:
  MlpCritic(int d, int h);
  explicit MlpCritic(Layers layers);

  /// Weights Uniform(±1/√fan_in), biases zero.
  static MlpCritic init(int d, int h, Rng& rng);

  int dim() const { return layers_.dim(); }
  int width() const { return layers_.width(); }
  std::size_t param_count() const { return nsc::param_count(dim(), width()); }

  const Layers& layers() const { return layers_; }
  Layers& layers() { return layers_; }
  ParamVector params() const { return pack(layers_); }
  void set_params(const ParamVector& params);

  /// Freezes the current parameters as the centering reference, so the
  /// critic output is zero at the current θ.
  void enable_centering() { reference_ = layers_; }
  void set_reference(Layers reference) { reference_ = std::move(reference); }
  void disable_centering() { reference_.reset(); }
  bool centered() const { return reference_.has_value(); }
  const std::optional<Layers>& reference() const { return reference_; }

  /// Multiplies the output layer (and the reference's) by `factor`.
  void scale_output(double factor);

  Vector forward(const Vector& x) const;
  SampleMatrix forward_batch(const SampleMatrix& x) const;

  /// d×d input Jacobian ∂f/∂x.
  Matrix input_jacobian(const Vector& x) const;
  double divergence_exact(const Vector& x) const;
  /// (1/K) Σ_k v_kᵀ J v_k with K Rademacher probes.
  double divergence_hutchinson(const Vector& x, int probes, Rng& rng) const;

  /// Outputs and divergences. `probes` is null for exact divergence, otherwise
  /// a d × (n·K) matrix of directions (column block i for row i).
  CriticEval evaluate(const SampleMatrix& x, const Matrix* probes = nullptr, int k = 0) const;
  CriticEval evaluate(const SampleMatrix& x, DivMode mode, Rng& rng) const;

  /// d × M Jacobian of the output with respect to the parameters.
  Matrix param_jacobian(const Vector& x) const;

  /// Σ_i g_iᵀ ∂_θ f(x_i, θ), with g given one row per sample.
  ParamVector output_vjp(const SampleMatrix& x, const SampleMatrix& g) const;

  /// Mean over the batch of −T_q f + (λ/2)|f|² and its exact θ-gradient
  /// (including the ∂_θ(∇·f) term). Probe semantics as in evaluate().
  LossGrad loss_and_grad(const SampleMatrix& x, const SampleMatrix& score_q, double lambda,
                         const Matrix* probes = nullptr, int k = 0) const;

 private:
  Layers layers_;
  std::optional<Layers> reference_;
};

/// Convenience wrapper: scores from `q`, probes drawn from `rng` per `mode`.
/// Throws NonFiniteError if the loss or gradient is not finite.
LossGrad loss_and_grad(const MlpCritic& critic, const SampleMatrix& batch, const ScoreField& q,
                       double lambda, DivMode mode, Rng& rng);

}  // namespace nsc
