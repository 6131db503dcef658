#include "nsc/gof.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "nsc/csv.hpp"
#include "nsc/parallel.hpp"

namespace nsc {

namespace {

WitnessMode mode_from(const MlpCritic& critic, std::optional<DivMode> div, Rng& rng) {
  return WitnessMode{div.value_or(default_div_mode(critic.dim())), rng()};
}

}  // namespace

void GofConfig::validate() const {
  if (n_gof < 1) throw std::invalid_argument("gof: n_GoF must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("gof: alpha must lie in (0, 1)");
  if (n_boot < 1) throw std::invalid_argument("gof: n_boot must be >= 1");
  if (r_pool < 1) throw std::invalid_argument("gof: r_pool must be >= 1");
}

double test_statistic(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& test_samples,
                      const WitnessMode& mode) {
  return sd_estimate(critic, q, test_samples, mode);
}

WitnessBatch null_pool(const MlpCritic& critic, const ScoreField& q, const ScoreField& q_sampler,
                       std::size_t n_pool, Rng& rng, std::optional<DivMode> div) {
  if (n_pool < 1) throw std::invalid_argument("null_pool: empty pool");
  const SampleMatrix xs = q_sampler.sample(n_pool, rng);
  return make_witness_batch(critic, q, xs, mode_from(critic, div, rng), "null_pool");
}

std::vector<double> efficient_null_stats(const Vector& pool, std::size_t n_gof, std::size_t n_boot, Rng& rng) {
  if (pool.size() < 1) throw std::invalid_argument("efficient_null_stats: empty pool");
  if (n_gof < 1) throw std::invalid_argument("efficient_null_stats: n_GoF must be >= 1");
  const auto size = static_cast<std::size_t>(pool.size());
  std::vector<double> stats(n_boot);
  for (auto& s : stats) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n_gof; ++i) sum += pool[static_cast<Eigen::Index>(uniform_index(rng, size))];
    s = sum / static_cast<double>(n_gof);
  }
  return stats;
}

std::vector<double> fresh_null_stats(const MlpCritic& critic, const ScoreField& q, const ScoreField& q_sampler,
                                     std::size_t n_gof, std::size_t n_boot, Rng& rng,
                                     std::optional<DivMode> div) {
  if (n_gof < 1) throw std::invalid_argument("fresh_null_stats: n_GoF must be >= 1");
  std::vector<double> stats(n_boot);
  for (auto& s : stats) {
    const SampleMatrix xs = q_sampler.sample(n_gof, rng);
    s = test_statistic(critic, q, xs, mode_from(critic, div, rng));
  }
  return stats;
}

double threshold(std::vector<double> null_stats, double alpha) {
  if (null_stats.empty()) throw std::invalid_argument("threshold: no null statistics");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("threshold: alpha must lie in (0, 1)");
  const auto n = null_stats.size();
  // The small offset keeps products like 0.95·100 from rounding up a rank.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(null_stats.begin(), null_stats.begin() + static_cast<std::ptrdiff_t>(rank - 1), null_stats.end());
  return null_stats[rank - 1];
}

TestOutcome run_test(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& p_test_samples,
                     const ScoreField& q_sampler, const GofConfig& cfg, Rng& rng, const Vector* pool,
                     bool keep_null, std::optional<DivMode> div) {
  cfg.validate();
  if (static_cast<std::size_t>(p_test_samples.rows()) != cfg.n_gof) {
    throw std::invalid_argument("run_test: test set size differs from n_GoF");
  }
  TestOutcome out;
  out.statistic = test_statistic(critic, q, p_test_samples, mode_from(critic, div, rng));
  std::vector<double> stats;
  if (pool != nullptr) {
    stats = efficient_null_stats(*pool, cfg.n_gof, cfg.n_boot, rng);
  } else {
    const WitnessBatch fresh = null_pool(critic, q, q_sampler, cfg.n_pool(), rng, div);
    stats = efficient_null_stats(fresh.values, cfg.n_gof, cfg.n_boot, rng);
  }
  out.threshold = threshold(stats, cfg.alpha);
  out.reject = out.statistic > out.threshold;
  if (keep_null) out.null_stats = std::move(stats);
  return out;
}

double critic_power(const MlpCritic& critic, const ScoreField& q, const ScoreField& p_sampler,
                    const ScoreField& q_sampler, std::size_t n_run, const GofConfig& cfg, std::uint64_t seed,
                    std::vector<RunLog>* log, std::optional<DivMode> div) {
  cfg.validate();
  if (n_run < 1) throw std::invalid_argument("power: n_run must be >= 1");
  std::optional<Vector> shared;
  if (cfg.reuse_pool) {
    Rng pool_rng = make_rng(seed, 0);
    shared = null_pool(critic, q, q_sampler, cfg.n_pool(), pool_rng, div).values;
  }
  const std::uint64_t run_seed = derive_seed(seed, 1);
  std::vector<RunLog> runs(n_run);
  parallel_for(n_run, [&](std::size_t j) {
    Rng rng = make_rng(run_seed, j);
    const SampleMatrix test = p_sampler.sample(cfg.n_gof, rng);
    const TestOutcome t = run_test(critic, q, test, q_sampler, cfg, rng, shared ? &*shared : nullptr, false, div);
    runs[j] = RunLog{t.statistic, t.threshold, t.reject};
  });
  std::size_t rejected = 0;
  for (const auto& r : runs) rejected += r.reject ? 1 : 0;
  if (log != nullptr) *log = std::move(runs);
  return static_cast<double>(rejected) / static_cast<double>(n_run);
}

void PowerSpec::validate() const {
  if (!p || !q) throw std::invalid_argument("power: p and q are required");
  if (p->dim() != q->dim()) throw std::invalid_argument("power: dimension mismatch");
  if (!p->can_sample() || !q->can_sample()) throw std::invalid_argument("power: p and q must be samplable");
  if (n_run < 1) throw std::invalid_argument("power: n_run must be >= 1");
  if (n_replica < 1) throw std::invalid_argument("power: n_replica must be >= 1");
  if (n_val < 1) throw std::invalid_argument("power: n_val must be >= 1");
  gof.validate();
  train.validate(n_train);
}

PowerReport estimate_power(const PowerSpec& spec) {
  spec.validate();
  PowerReport report;
  std::vector<double> powers;
  for (std::size_t r = 0; r < spec.n_replica; ++r) {
    const std::uint64_t rs = derive_seed(spec.seed, r);
    ReplicaPower rep;
    rep.replica = r;
    Rng data_rng = make_rng(rs, 1);
    TrainData data{spec.p->sample(spec.n_train, data_rng), spec.p->sample(spec.n_val, data_rng)};
    TrainConfig tc = spec.train;
    tc.seed = derive_seed(rs, 0);
    std::optional<CurveOracle> oracle;
    if (spec.fstar) {
      Rng orng = make_rng(rs, 2);
      oracle = CurveOracle::make(*spec.fstar, spec.q->sample(spec.n_oracle, orng));
    }
    const TrainReport tr = train(data, *spec.q, tc, oracle ? &*oracle : nullptr);
    if (tr.diverged || !tr.best) {
      rep.failed = true;
      rep.diagnostic = tr.diagnostic.empty() ? "no checkpoint recorded" : tr.diagnostic;
      ++report.failed;
      report.replicas.push_back(rep);
      continue;
    }
    const MlpCritic critic = tr.best->to_critic();
    rep.best_monitor = tr.best->monitor;
    rep.best_lambda = tr.best->lambda;
    if (oracle) rep.mse_q = scaled_mse(critic, rep.best_lambda, oracle->q_samples, oracle->fstar_at_q);
    rep.power = critic_power(critic, *spec.q, *spec.p, *spec.q, spec.n_run, spec.gof, derive_seed(rs, 3), nullptr,
                             spec.train.div_mode);
    powers.push_back(rep.power);
    report.replicas.push_back(rep);
  }
  std::tie(report.mean, report.std) = mean_std(powers);
  return report;
}

void write_power_csv(const PowerReport& report, const PowerSpec& spec, std::ostream& out) {
  CsvWriter csv(out, {"replica", "power", "n_run", "n_GoF", "alpha", "schedule_id"});
  const std::string id = spec.train.schedule.id();
  for (const auto& r : report.replicas) {
    csv.row(r.replica, r.failed ? std::optional<double>() : std::optional<double>(r.power), spec.n_run,
            spec.gof.n_gof, spec.gof.alpha, id);
  }
}

void write_test_log(const std::vector<RunLog>& log, std::ostream& out) {
  CsvWriter csv(out, {"run", "statistic", "threshold", "reject"});
  for (std::size_t j = 0; j < log.size(); ++j) {
    csv.row(j, log[j].statistic, log[j].threshold, log[j].reject ? 1 : 0);
  }
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace nsc
