#include "nsc/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "nsc/csv.hpp"

namespace nsc {

namespace {

enum Stream : std::uint64_t { kInitStream = 0, kShuffleStream = 1, kProbeStream = 2, kMonitorStream = 3 };

std::string compact(double v) { return format_double(v); }

}  // namespace

double lambda_at(double lambda_init, double lambda_term, double beta, long long interval) {
  if (interval < 0) throw std::invalid_argument("lambda_at: negative interval");
  if (interval == 0) return lambda_init;
  return std::max(lambda_init * std::pow(beta, static_cast<double>(interval)), lambda_term);
}

// ---------------------------------------------------------------------------
// LambdaSchedule

LambdaSchedule::LambdaSchedule(Kind kind, double init, double term, double beta)
    : kind_(kind), init_(init), term_(term), beta_(beta), lambda_(init) {
  if (!(init > 0.0) || !(term > 0.0)) throw std::invalid_argument("schedule: lambda must be positive");
  if (term > init) throw std::invalid_argument("schedule: lambda_term must not exceed lambda_init");
  if (kind != Kind::kFixed && !(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("schedule: beta must lie in (0, 1)");
  }
}

LambdaSchedule LambdaSchedule::fixed(double lambda) { return {Kind::kFixed, lambda, lambda, 1.0}; }

LambdaSchedule LambdaSchedule::staged(double lambda_init, double lambda_term, double beta) {
  return {Kind::kStaged, lambda_init, lambda_term, beta};
}

LambdaSchedule LambdaSchedule::adaptive(double lambda_init, double lambda_term, double beta) {
  return {Kind::kAdaptive, lambda_init, lambda_term, beta};
}

double LambdaSchedule::adaptive_step(double monitor) {
  if (previous_monitor_) {
    if (monitor > *previous_monitor_ && improved_) {
      lambda_ = std::max(beta_ * lambda_, term_);
      improved_ = false;
    } else if (monitor < *previous_monitor_) {
      improved_ = true;
    }
  }
  previous_monitor_ = monitor;
  return lambda_;
}

double LambdaSchedule::advance(double monitor) {
  ++interval_;
  switch (kind_) {
    case Kind::kFixed:
      break;
    case Kind::kStaged:
      lambda_ = lambda_at(init_, term_, beta_, interval_);
      break;
    case Kind::kAdaptive:
      adaptive_step(monitor);
      break;
  }
  return lambda_;
}

std::string LambdaSchedule::id() const {
  switch (kind_) {
    case Kind::kFixed:
      return "fixed(" + compact(init_) + ")";
    case Kind::kStaged:
      return "staged(" + compact(init_) + "," + compact(term_) + "," + compact(beta_) + ")";
    case Kind::kAdaptive:
      return "adaptive(" + compact(init_) + "," + compact(term_) + "," + compact(beta_) + ")";
  }
  return {};
}

// ---------------------------------------------------------------------------
// Optimizers

void adam_update(AdamState& s, Vector& params, const Vector& grad, double lr) {
  if (params.size() != grad.size()) throw std::invalid_argument("adam: size mismatch");
  if (s.m.size() != params.size()) {
    s.m = Vector::Zero(params.size());
    s.v = Vector::Zero(params.size());
  }
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate(std::size_t n_train) const {
  if (width < 1) throw std::invalid_argument("train: width must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (batch_size > n_train) throw std::invalid_argument("train: batch size exceeds training set");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
}

TrainData split_train_val(const SampleMatrix& samples, double val_fraction) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split: validation fraction must lie in [0, 1)");
  }
  const auto n = samples.rows();
  const auto n_val = static_cast<Eigen::Index>(std::llround(val_fraction * static_cast<double>(n)));
  return TrainData{samples.topRows(n - n_val), samples.bottomRows(n_val)};
}

CurveOracle CurveOracle::make(const OptimalCritic& fstar, SampleMatrix q_samples) {
  CurveOracle o;
  o.fstar_at_q = fstar.batch(q_samples);
  o.q_samples = std::move(q_samples);
  return o;
}

std::optional<std::size_t> TrainReport::best_record() const {
  if (records.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].monitor < records[best].monitor) best = i;
  }
  return best;
}

TrainReport train(const TrainData& data, const ScoreField& q, const TrainConfig& config,
                  const CurveOracle* oracle) {
  const auto n_train = static_cast<std::size_t>(data.train.rows());
  config.validate(n_train);
  if (data.val.rows() < 1) throw std::invalid_argument("train: empty validation set");
  const int d = q.dim();
  if (data.train.cols() != d || data.val.cols() != d) throw std::invalid_argument("train: dimension mismatch");

  Rng init_rng = make_rng(config.seed, kInitStream);
  Rng shuffle_rng = make_rng(config.seed, kShuffleStream);
  Rng probe_rng = make_rng(config.seed, kProbeStream);
  const DivMode div = config.div_mode.value_or(default_div_mode(d));
  const WitnessMode monitor_mode{div, derive_seed(config.seed, kMonitorStream)};

  MlpCritic critic = MlpCritic::init(d, config.width, init_rng);
  LambdaSchedule schedule = config.schedule;
  AdamState adam(static_cast<Eigen::Index>(critic.param_count()));

  const std::size_t per_epoch = (n_train + config.batch_size - 1) / config.batch_size;
  const std::size_t interval_len = config.batches_per_interval ? config.batches_per_interval : per_epoch;
  const std::size_t total = per_epoch * static_cast<std::size_t>(config.epochs);
  const SampleMatrix val_scores = q.score_batch(data.val);

  TrainReport report;
  std::vector<Eigen::Index> order(n_train);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t done = 0;

  auto observe = [&](double lambda) {
    TrainRecord rec;
    rec.interval = schedule.interval() + 1;
    rec.epoch = static_cast<double>(done) / static_cast<double>(per_epoch);
    rec.lambda = lambda;
    rec.monitor = monitor_mse(critic, lambda, q, data.val, monitor_mode);
    const Vector w = witness_values(critic, q, data.val, monitor_mode);
    rec.sd = w.mean();
    if (oracle != nullptr) rec.mse_q = scaled_mse(critic, lambda, oracle->q_samples, oracle->fstar_at_q);
    if (!std::isfinite(rec.monitor)) throw NonFiniteError("non-finite monitor");
    if (!report.best || rec.monitor < report.best->monitor) {
      report.best = Checkpoint::from_critic(critic, lambda, rec.interval, rec.monitor, config.seed);
    }
    report.records.push_back(rec);
    schedule.advance(rec.monitor);
  };

  try {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      for (std::size_t i = n_train; i > 1; --i) {
        std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
      }
      for (std::size_t start = 0; start < n_train; start += config.batch_size) {
        const std::size_t len = std::min(config.batch_size, n_train - start);
        SampleMatrix batch(static_cast<Eigen::Index>(len), d);
        for (std::size_t r = 0; r < len; ++r) {
          batch.row(static_cast<Eigen::Index>(r)) = data.train.row(order[start + r]);
        }
        const double lambda = schedule.current();
        const LossGrad lg = loss_and_grad(critic, batch, q, lambda, div, probe_rng);
        Vector params = critic.params();
        if (config.optimizer == Optimizer::kAdam) {
          adam_update(adam, params, lg.grad, config.lr);
        } else {
          params -= config.lr * lg.grad;
        }
        critic.set_params(params);
        ++done;
        if (done % interval_len == 0 || done == total) observe(lambda);
      }
    }
  } catch (const NonFiniteError& e) {
    report.diverged = true;
    std::ostringstream msg;
    msg << "diverged after " << done << " batches (lambda " << schedule.current() << "): " << e.what();
    report.diagnostic = msg.str();
  }
  (void)val_scores;

  report.batches = static_cast<long long>(done);
  report.epochs_run = static_cast<double>(done) / static_cast<double>(per_epoch);
  const double last_monitor = report.records.empty() ? 0.0 : report.records.back().monitor;
  const double last_lambda = report.records.empty() ? schedule.current() : report.records.back().lambda;
  report.final_state = Checkpoint::from_critic(critic, last_lambda, schedule.interval(), last_monitor, config.seed);
  return report;
}

TrainReport train(const SampleMatrix& p_samples, const ScoreField& q, const TrainConfig& config,
                  const CurveOracle* oracle) {
  return train(split_train_val(p_samples, 0.2), q, config, oracle);
}

void write_curves_csv(const TrainReport& report, std::ostream& out) {
  CsvWriter csv(out, {"interval", "epoch", "lambda", "monitor", "mse_q", "sd"});
  for (const auto& r : report.records) {
    csv.row(r.interval, r.epoch, r.lambda, r.monitor, r.mse_q, r.sd);
  }
}

}  // namespace nsc
