#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "nsc/critic.hpp"

namespace nsc {

/// Divergence configuration for witness evaluation. In Hutchinson mode
/// sample i of a set always uses probes drawn from make_rng(probe_seed, i),
/// so repeated evaluation over the same set is deterministic.
struct WitnessMode {
  DivMode div = DivMode::exact();
  std::uint64_t probe_seed = 0;
};

WitnessMode default_witness_mode(int d, std::uint64_t probe_seed = 0);

/// Probes for rows [offset, offset + n) of a set under a fixed seed.
Matrix seeded_probes(int d, Eigen::Index n, int k, std::uint64_t seed, std::uint64_t offset = 0);

/// Witness values T_q f(x_i) = s_q(x_i)·f(x_i) + ∇·f(x_i) for a sample set.
struct WitnessBatch {
  Vector values;
  std::string sample_set;  // provenance labels
  std::string checkpoint;
  WitnessMode mode;

  Eigen::Index size() const { return values.size(); }
};

/// Single-point witness; Hutchinson probes come from `rng`.
double witness(const MlpCritic& critic, const ScoreField& q, const Vector& x, DivMode mode, Rng& rng);

Vector witness_values(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& x,
                      const WitnessMode& mode);

/// Row-wise s·f + div for any field given its values and divergences.
Vector stein_values(const SampleMatrix& scores, const SampleMatrix& f, const Vector& div);

WitnessBatch make_witness_batch(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& x,
                                const WitnessMode& mode, std::string sample_set = {},
                                std::string checkpoint = {});

/// Sample-average estimate of SD[f] = E_p T_q f.
double sd_estimate(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& samples,
                   const WitnessMode& mode = {});
double sd_estimate(const Vector& witness_values);

/// (1/n) Σ ( −T_q f(x_i) + (λ/2)|f(x_i)|² ).
double empirical_loss(const MlpCritic& critic, const SampleMatrix& samples, const ScoreField& q,
                      double lambda, const WitnessMode& mode = {});

/// CSV with header "index,witness".
void write_witness_csv(const WitnessBatch& batch, std::ostream& out);

}  // namespace nsc
