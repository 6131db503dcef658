#pragma once

#include <string>

#include "nsc/stein.hpp"

namespace nsc {

struct MetricValue {
  std::string name;
  double value = 0.0;
  std::size_t n = 0;
  double lambda = 0.0;
};

/// {"name":..,"value":..,"n":..,"lambda":..}
std::string to_json(const MetricValue& m);

/// (1/n) Σ |λ f(x_i) − f*(x_i)|², given f* on the same rows.
double scaled_mse(const MlpCritic& critic, double lambda, const SampleMatrix& samples,
                  const SampleMatrix& fstar_values);

/// Evaluation MSE on samples from q.
double mse_q_hat(const MlpCritic& critic, double lambda, const OptimalCritic& fstar,
                 const SampleMatrix& q_samples);
/// Same quantity on samples from p.
double mse_p_hat(const MlpCritic& critic, double lambda, const OptimalCritic& fstar,
                 const SampleMatrix& p_samples);

/// Oracle-free monitor: 2λ · empirical_loss on validation samples from p.
double monitor_mse(const MlpCritic& critic, double lambda, const ScoreField& q,
                   const SampleMatrix& p_samples, const WitnessMode& mode = {});

/// σ(w) = (1/n) sqrt(Σ (w_i − w̄)²).
double witness_spread(const Vector& w);

/// Mean p-witness over the summed spreads of p- and q-witnesses. Throws
/// std::domain_error when the denominator is below 1e-12.
double power_proxy(const Vector& w_p, const Vector& w_q);
double power_proxy(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& p_samples,
                   const SampleMatrix& q_samples, const WitnessMode& mode = {});

}  // namespace nsc
