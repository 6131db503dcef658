#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsc/distributions.hpp"
#include "nsc/gof.hpp"
#include "nsc/ksd.hpp"
#include "nsc/ntk.hpp"
#include "nsc/training.hpp"

namespace nsc {

/// One Gaussian mixture given explicitly.
struct MixtureSpec {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<std::vector<double>>> covariances;
};

/// Which p/q pair an experiment uses.
///   benchmark_mixture: the benchmark pair in dimension d with (rho1, omega).
///   gaussian_mixture: explicit p and q.
///   rbm: q is an RBM with Rademacher couplings and N(0,1) biases drawn from
///     structure_seed; p adds perturbation·N(0,1) to every coupling.
/// With null = true, p is replaced by q.
struct DistributionSpec {
  std::string kind = "benchmark_mixture";
  int d = 2;
  double rho1 = 0.5;
  double omega = 0.8;
  std::optional<MixtureSpec> p;
  std::optional<MixtureSpec> q;
  int hidden = 5;
  double perturbation = 0.01;
  std::uint64_t structure_seed = 0;
  int gibbs_sweeps = 100;
  bool null = false;
};

struct DistributionPair {
  ScoreFieldPtr p;
  ScoreFieldPtr q;
};

DistributionPair build_distributions(const DistributionSpec& spec);

struct TrainSection {
  double lr = 1e-3;
  std::size_t batch = 200;
  int epochs = 60;
  std::size_t batches_per_interval = 0;  // 0 = one epoch
  std::string div_mode = "auto";         // auto | exact | hutchinson
  int probes = 1;
  std::string optimizer = "adam";        // adam | sgd
  std::size_t n_train = 2000;
  std::size_t n_val = 1000;
  std::size_t n_oracle = 5000;           // q samples for logging MSE_q; 0 disables
};

struct ScheduleSection {
  std::string kind = "staged";  // fixed | staged | adaptive
  double lambda = 1.0;          // fixed only
  double lambda_init = 1.0;
  double lambda_term = 5e-2;
  double beta = 0.9;
};

struct PowerSection {
  std::size_t n_run = 500;
  std::size_t n_replica = 5;
};

struct KsdSection {
  std::vector<double> deltas{1.0};
  std::size_t n_boot = 500;
  std::size_t n_sample = 500;
  std::size_t n_run = 100;
  std::size_t n_replica = 1;
};

struct NtkSection {
  Eigen::Index n = 200;
  int width = 64;
  std::vector<double> lambdas{0.5, 2.0, 8.0};
  double c = 1.0;
  double eta_factor = 1e-3;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string objective = "population";  // population | empirical_stein
};

struct SplitSection {
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t n_sample = 2000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DistributionSpec distribution;
  int width = 512;
  TrainSection train;
  ScheduleSection schedule;
  GofConfig gof;
  PowerSection power;
  KsdSection ksd;
  NtkSection ntk;
  SplitSection split;
  std::optional<std::string> checkpoint;  // gof: test this critic instead of training
  std::string out = "out";

  /// Checks every field; throws std::invalid_argument naming the key.
  void validate() const;

  LambdaSchedule make_schedule() const;
  TrainConfig make_train_config() const;
  LazySpec make_lazy_spec() const;
};

/// Parses a config object. Missing keys take defaults; unknown keys and
/// type mismatches throw std::invalid_argument with the offending path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config, every default expanded.
nlohmann::ordered_json to_json(const ExperimentConfig& c);

}  // namespace nsc
