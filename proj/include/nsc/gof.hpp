#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nsc/stein.hpp"
#include "nsc/training.hpp"

namespace nsc {

struct GofConfig {
  std::size_t n_gof = 100;
  double alpha = 0.05;
  std::size_t n_boot = 500;
  std::size_t r_pool = 50;
  /// Build one pool per critic and reuse it for every test; false draws a new
  /// pool for each test.
  bool reuse_pool = true;

  std::size_t n_pool() const { return r_pool * n_gof; }
  void validate() const;
};

struct TestOutcome {
  double statistic = 0.0;
  double threshold = 0.0;
  bool reject = false;
  std::vector<double> null_stats;  // empty unless retained
};

/// Mean witness on the test samples.
double test_statistic(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& test_samples,
                      const WitnessMode& mode = {});

/// Witness values on n_pool fresh samples from `q_sampler`. Hutchinson
/// probes (if any) are seeded from `rng`.
WitnessBatch null_pool(const MlpCritic& critic, const ScoreField& q, const ScoreField& q_sampler,
                       std::size_t n_pool, Rng& rng, std::optional<DivMode> div = std::nullopt);

/// Each statistic is the mean of n_gof draws with replacement from `pool`.
std::vector<double> efficient_null_stats(const Vector& pool, std::size_t n_gof, std::size_t n_boot, Rng& rng);

/// Each statistic is the mean witness over n_gof new samples from `q_sampler`.
std::vector<double> fresh_null_stats(const MlpCritic& critic, const ScoreField& q, const ScoreField& q_sampler,
                                     std::size_t n_gof, std::size_t n_boot, Rng& rng,
                                     std::optional<DivMode> div = std::nullopt);

/// The ⌈(1−α)n⌉-th smallest statistic (1-based rank).
double threshold(std::vector<double> null_stats, double alpha);

/// One test. Uses `pool` when given, otherwise draws a fresh pool of
/// cfg.n_pool() samples. Rejects iff statistic > threshold.
TestOutcome run_test(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& p_test_samples,
                     const ScoreField& q_sampler, const GofConfig& cfg, Rng& rng,
                     const Vector* pool = nullptr, bool keep_null = false,
                     std::optional<DivMode> div = std::nullopt);

/// Rejection frequency of n_run tests on fresh p test sets against a fixed
/// critic. Run j draws from derive_seed(seed, j), so the result does not
/// depend on the worker count.
struct RunLog {
  double statistic;
  double threshold;
  bool reject;
};
double critic_power(const MlpCritic& critic, const ScoreField& q, const ScoreField& p_sampler,
                    const ScoreField& q_sampler, std::size_t n_run, const GofConfig& cfg, std::uint64_t seed,
                    std::vector<RunLog>* log = nullptr, std::optional<DivMode> div = std::nullopt);

/// Full power study: each replica trains a critic on an independent draw
/// from p, then estimates its power with n_run tests.
struct PowerSpec {
  ScoreFieldPtr p;  // sampled for training and testing
  ScoreFieldPtr q;  // score and null samples
  TrainConfig train;
  std::size_t n_train = 2000;
  std::size_t n_val = 1000;
  std::size_t n_run = 500;
  std::size_t n_replica = 5;
  GofConfig gof;
  std::uint64_t seed = 0;
  /// Optional f* for logging MSE_q at the best checkpoint.
  std::optional<OptimalCritic> fstar;
  std::size_t n_oracle = 20000;

  void validate() const;
};

struct ReplicaPower {
  std::size_t replica = 0;
  double power = 0.0;
  bool failed = false;
  std::string diagnostic;
  double best_monitor = 0.0;
  double best_lambda = 0.0;
  std::optional<double> mse_q;
};

struct PowerReport {
  std::vector<ReplicaPower> replicas;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over successful replicas
  std::size_t failed = 0;
};

PowerReport estimate_power(const PowerSpec& spec);

/// CSV: replica,power,n_run,n_GoF,alpha,schedule_id
void write_power_csv(const PowerReport& report, const PowerSpec& spec, std::ostream& out);
/// CSV: run,statistic,threshold,reject
void write_test_log(const std::vector<RunLog>& log, std::ostream& out);

/// Two-sample Kolmogorov-Smirnov distance sup |F_a − F_b|.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(const std::vector<double>& v);

}  // namespace nsc
