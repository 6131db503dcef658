#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsc/critic.hpp"

namespace nsc {

/// Dense solves are limited to stacked sizes n·d up to this value.
inline constexpr Eigen::Index kMaxNtkSize = 2000;

/// Zero-time NTK on a point set. Stacked index i·d + a refers to output
/// coordinate a at point i; G = J Jᵀ with J the stacked parameter Jacobian.
struct NtkGram {
  SampleMatrix points;
  Matrix g;
  std::string snapshot;
};

NtkGram ntk_gram(const MlpCritic& critic, const SampleMatrix& points, std::string snapshot = {});

/// Eigen-system of (1/n)G, eigenvalues descending and clamped at zero.
struct EigSystem {
  Vector values;
  Matrix vectors;  // orthonormal columns
};

/// Throws if G is not symmetric to 1e-10 (relative) or has an eigenvalue
/// below −1e-8 times the largest.
EigSystem eig_sym_psd(const Matrix& g, Eigen::Index n);

/// Stacked values at a set of times.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> values;
  double step = 0.0;  // step actually used
  long long steps = 0;
};

/// Snapshot times are rounded to the nearest step; t_end is always recorded
/// last. The step is shrunk to t_end / ⌈t_end/η⌉ so that t_end is hit exactly.
/// Throws if η·λ·μ_max ≥ 2 or the iterate stops being finite.
Trajectory kernel_ode_euler(const Matrix& g, Eigen::Index n, const Vector& fstar, double lambda, double t_end,
                            double eta, const std::vector<double>& snapshot_times = {});

/// Closed form ū(t) = (1/λ) Σ_k c_k (1 − exp(−tλμ_k)) v_k, c_k = ⟨f*, v_k⟩.
Vector spectral_solution(const EigSystem& eig, const Vector& fstar, double lambda, double t);

/// Which loss full-batch GD descends.
///  kPopulation: mean(λ/2 |u|² − f*·u), the Stein loss with its expectation
///    under p replaced by the f* inner product; its linearization is exactly
///    the kernel ODE above.
///  kEmpiricalStein: mean(−T_q u + λ/2 |u|²) on the points (needs q).
enum class GdObjective { kPopulation, kEmpiricalStein };

/// Full-batch GD from the critic's current parameters. The critic should be
/// centered so that u(·,0) = 0. Same step and snapshot conventions as
/// kernel_ode_euler. Throws NonFiniteError on divergence.
Trajectory gd_trajectory(MlpCritic critic, const SampleMatrix& points, const Vector& fstar, double lambda,
                         double t_end, double eta, const std::vector<double>& snapshot_times = {},
                         GdObjective objective = GdObjective::kPopulation, const ScoreField* q = nullptr);

/// Stacks an n×d sample matrix into an n·d vector (row-major).
Vector stack(const SampleMatrix& values);

/// sqrt((1/n) Σ_i |v_i|²) for a stacked vector over n points.
double empirical_norm(const Vector& stacked, Eigen::Index n);

struct LazySpec {
  int width = 64;
  Eigen::Index n = 200;
  int d = 2;
  std::vector<double> lambdas{0.5, 2.0, 8.0};
  double c = 1.0;  // final time t = c/λ
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double eta_factor = 1e-3;  // η = eta_factor / (λ μ_max)
  /// Reference points come from p of the benchmark mixture with these parameters.
  double rho1 = 0.5;
  double omega = 0.8;
  /// Fractions of t at which the deviation is also reported.
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  GdObjective objective = GdObjective::kPopulation;

  void validate() const;
};

struct LazyRunReport {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  int width = 0;
  Eigen::Index n = 0;
  double eta = 0.0;
  long long steps = 0;
  double mu_max = 0.0;
  double fstar_norm = 0.0;
  std::vector<double> times;
  std::vector<double> dev;       // |λu − λū|
  std::vector<double> dev_rel;   // dev / |f*|
  std::vector<double> ubar_err;  // |λū − f*|
};

/// One report per (λ, seed), ordered λ-major.
std::vector<LazyRunReport> lazy_deviation(const LazySpec& spec);

/// Median over seeds of dev_rel at the final time, per λ in spec order.
std::vector<double> median_final_deviation(const LazySpec& spec, const std::vector<LazyRunReport>& reports);

/// CSV: lambda,t,dev_rel,ubar_err,seed,width,n
void write_lazy_csv(const std::vector<LazyRunReport>& reports, std::ostream& out);

}  // namespace nsc
