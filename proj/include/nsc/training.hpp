#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nsc/checkpoint.hpp"
#include "nsc/metrics.hpp"

namespace nsc {

/// max(λ_init·β^i, λ_term) for i > 0, λ_init at i = 0.
double lambda_at(double lambda_init, double lambda_term, double beta, long long interval);

/// Regularization-weight policy, advanced once per interval of B_w batches.
class LambdaSchedule {
 public:
  enum class Kind { kFixed, kStaged, kAdaptive };

  static LambdaSchedule fixed(double lambda);
  static LambdaSchedule staged(double lambda_init, double lambda_term, double beta);
  static LambdaSchedule adaptive(double lambda_init, double lambda_term, double beta);

  Kind kind() const { return kind_; }
  double current() const { return lambda_; }
  double lambda_init() const { return init_; }
  double lambda_term() const { return term_; }
  double beta() const { return beta_; }
  long long interval() const { return interval_; }

  /// Called at the end of each interval with the monitor measured on it.
  /// Returns the λ for the next interval.
  double advance(double monitor);

  /// Adaptive rule: stage down by β when the monitor rises, but only after it
  /// has fallen at least once since the previous stage-down.
  double adaptive_step(double monitor);

  /// Short label, e.g. "staged(0.4,5e-04,0.85)".
  std::string id() const;

 private:
  LambdaSchedule(Kind kind, double init, double term, double beta);

  Kind kind_;
  double init_;
  double term_;
  double beta_;
  double lambda_;
  long long interval_ = 0;
  std::optional<double> previous_monitor_;
  bool improved_ = false;
};

/// Bias-corrected Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
struct AdamState {
  Vector m;
  Vector v;
  long long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(Eigen::Index size = 0) : m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

void adam_update(AdamState& state, Vector& params, const Vector& grad, double lr);

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  int width = 512;
  std::size_t batch_size = 200;
  double lr = 1e-3;
  int epochs = 60;
  /// Batches per λ interval and monitor observation; 0 means one epoch.
  std::size_t batches_per_interval = 0;
  LambdaSchedule schedule = LambdaSchedule::fixed(1.0);
  std::optional<DivMode> div_mode;  // default_div_mode(d) when unset
  Optimizer optimizer = Optimizer::kAdam;
  std::uint64_t seed = 0;

  void validate(std::size_t n_train) const;
};

struct TrainData {
  SampleMatrix train;
  SampleMatrix val;
};

/// Leading (1 − val_fraction) rows train, remainder validates.
TrainData split_train_val(const SampleMatrix& samples, double val_fraction = 0.2);

/// Oracle information used only for logging MSE_q.
struct CurveOracle {
  SampleMatrix q_samples;
  SampleMatrix fstar_at_q;  // f* evaluated on q_samples

  static CurveOracle make(const OptimalCritic& fstar, SampleMatrix q_samples);
};

struct TrainRecord {
  long long interval = 0;  // 1-based count of completed intervals
  double epoch = 0.0;      // batches completed / batches per epoch
  double lambda = 0.0;     // λ in effect during the interval
  double monitor = 0.0;
  std::optional<double> mse_q;
  double sd = 0.0;  // SD estimate on the validation set
};

struct TrainReport {
  std::vector<TrainRecord> records;
  std::optional<Checkpoint> best;  // argmin monitor
  Checkpoint final_state;
  bool diverged = false;
  std::string diagnostic;
  long long batches = 0;
  double epochs_run = 0.0;

  std::optional<std::size_t> best_record() const;
};

/// Mini-batch training of a freshly initialized critic. Everything random
/// (initialization, shuffling, probes) derives from config.seed.
TrainReport train(const TrainData& data, const ScoreField& q, const TrainConfig& config,
                  const CurveOracle* oracle = nullptr);

/// Same, applying an 80/20 train/validation split to `p_samples`.
TrainReport train(const SampleMatrix& p_samples, const ScoreField& q, const TrainConfig& config,
                  const CurveOracle* oracle = nullptr);

/// CSV: interval,epoch,lambda,monitor,mse_q,sd
void write_curves_csv(const TrainReport& report, std::ostream& out);

}  // namespace nsc
