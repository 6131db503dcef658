#include "nsc/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace nsc {

std::string to_json(const MetricValue& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["value"] = m.value;
  j["n"] = m.n;
  j["lambda"] = m.lambda;
  return j.dump();
}

double scaled_mse(const MlpCritic& critic, double lambda, const SampleMatrix& samples,
                  const SampleMatrix& fstar_values) {
  if (!(lambda > 0.0)) throw std::invalid_argument("mse: lambda must be positive");
  if (samples.rows() < 1) throw std::invalid_argument("mse: empty sample set");
  const SampleMatrix f = critic.forward_batch(samples);
  return (lambda * f - fstar_values).squaredNorm() / static_cast<double>(samples.rows());
}

double mse_q_hat(const MlpCritic& critic, double lambda, const OptimalCritic& fstar,
                 const SampleMatrix& q_samples) {
  return scaled_mse(critic, lambda, q_samples, fstar.batch(q_samples));
}

double mse_p_hat(const MlpCritic& critic, double lambda, const OptimalCritic& fstar,
                 const SampleMatrix& p_samples) {
  return scaled_mse(critic, lambda, p_samples, fstar.batch(p_samples));
}

double monitor_mse(const MlpCritic& critic, double lambda, const ScoreField& q,
                   const SampleMatrix& p_samples, const WitnessMode& mode) {
  return 2.0 * lambda * empirical_loss(critic, p_samples, q, lambda, mode);
}

double witness_spread(const Vector& w) {
  const double n = static_cast<double>(w.size());
  return std::sqrt((w.array() - w.mean()).square().sum()) / n;
}

double power_proxy(const Vector& w_p, const Vector& w_q) {
  if (w_p.size() < 2 || w_q.size() < 2) {
    throw std::invalid_argument("power_proxy: need at least two samples per set");
  }
  const double denom = witness_spread(w_p) + witness_spread(w_q);
  if (denom < 1e-12) throw std::domain_error("power_proxy: constant witness (zero spread)");
  return w_p.mean() / denom;
}

double power_proxy(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& p_samples,
                   const SampleMatrix& q_samples, const WitnessMode& mode) {
  WitnessMode q_mode = mode;
  q_mode.probe_seed = derive_seed(mode.probe_seed, 1);
  return power_proxy(witness_values(critic, q, p_samples, mode),
                     witness_values(critic, q, q_samples, q_mode));
}

}  // namespace nsc
