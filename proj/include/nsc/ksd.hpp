#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nsc/distributions.hpp"
#include "nsc/gof.hpp"

namespace nsc {

/// k(x, x') = exp(−γ|x − x'|²), γ = 1/(2σ²).
struct RbfKernel {
  double gamma = 0.5;

  static RbfKernel from_sigma(double sigma);
  double sigma() const;
  /// Bandwidth scaled to γ' = 1/(2δσ²).
  RbfKernel scaled(double delta) const;

  double operator()(const Vector& x, const Vector& y) const;
  Vector grad_x(const Vector& x, const Vector& y) const;
  Vector grad_y(const Vector& x, const Vector& y) const;
  /// tr ∇_x ∇_{x'} k.
  double trace_mixed(const Vector& x, const Vector& y) const;
};

/// Stein kernel u_q(x, x') given the scores at both points.
double u_q(const Vector& x, const Vector& y, const Vector& sx, const Vector& sy, const RbfKernel& k);
double u_q(const Vector& x, const Vector& y, const ScoreField& q, const RbfKernel& k);

/// n×n matrix U_ij = u_q(x_i, x_j).
Matrix u_matrix(const SampleMatrix& samples, const SampleMatrix& scores, const RbfKernel& k);

/// (1/n²) Σ_ij u_q(x_i, x_j), diagonal included.
double v_statistic(const SampleMatrix& samples, const ScoreField& q, const RbfKernel& k);

/// σ = median of |x_i − x_j| over pairs i < j (coincident distinct points
/// contribute zeros; an even count averages the two middle values).
/// Throws if σ = 0.
RbfKernel median_bandwidth(const SampleMatrix& samples);

/// (1/n²) WᵀUW for n_boot independent Rademacher vectors W.
std::vector<double> wild_bootstrap_stats(const Matrix& u, std::size_t n_boot, Rng& rng);
/// Same with caller-supplied multipliers, one column per replica.
std::vector<double> wild_bootstrap_stats(const Matrix& u, const Matrix& multipliers);
/// (1/n²) 1ᵀU1, evaluated exactly as a bootstrap replica with W ≡ 1.
double statistic_from_u(const Matrix& u);

struct KsdTiming {
  double statistic_seconds = 0.0;
  double bootstrap_seconds = 0.0;
};

TestOutcome ksd_test(const SampleMatrix& samples, const ScoreField& q, const RbfKernel& k, double alpha,
                     std::size_t n_boot, Rng& rng, KsdTiming* timing = nullptr, bool keep_null = false);

/// Power of the KSD test at each bandwidth factor δ (γ' = γ_median/δ).
/// Every δ sees the same sample sets and multiplier streams.
struct KsdSweepSpec {
  ScoreFieldPtr p;  // sampled
  ScoreFieldPtr q;  // score
  std::size_t n_sample = 500;
  std::vector<double> deltas{1.0};
  double alpha = 0.05;
  std::size_t n_boot = 500;
  std::size_t n_run = 100;
  std::size_t n_replica = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct KsdSweepRow {
  double delta = 1.0;
  double power_mean = 0.0;
  double power_std = 0.0;  // across replicas
  double sigma = 0.0;      // mean median-heuristic σ over the sample sets
  double gamma = 0.0;      // 1/(2δσ²) at that σ
  double statistic_seconds = 0.0;  // mean per test
  double bootstrap_seconds = 0.0;
};

struct KsdSweepReport {
  std::vector<KsdSweepRow> rows;
  std::size_t best = 0;  // argmax power_mean, first on ties
};

KsdSweepReport bandwidth_sweep(const KsdSweepSpec& spec);

/// CSV: delta,power_mean,power_std,sigma,gamma
void write_sweep_csv(const KsdSweepReport& report, std::ostream& out);

}  // namespace nsc
