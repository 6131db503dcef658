#include "nsc/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "nsc/checkpoint.hpp"
#include "nsc/csv.hpp"

namespace nsc {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Substreams of the run seed used by the commands.
enum : std::uint64_t { kDataStream = 100, kOracleStream = 101, kTestStream = 200 };

fs::path prepare(const ExperimentConfig& c) {
  fs::path out(c.out);
  fs::create_directories(out);
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const ordered_json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

ordered_json nullable(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

struct Trained {
  TrainReport report;
  MlpCritic critic{1, 1};
};

Trained train_from_config(const ExperimentConfig& c, const DistributionPair& dp, const fs::path& out) {
  Rng data_rng = make_rng(c.seed, kDataStream);
  TrainData data{dp.p->sample(c.train.n_train, data_rng), dp.p->sample(c.train.n_val, data_rng)};
  std::optional<CurveOracle> oracle;
  if (c.train.n_oracle > 0) {
    Rng orng = make_rng(c.seed, kOracleStream);
    oracle = CurveOracle::make(OptimalCritic(dp.p, dp.q), dp.q->sample(c.train.n_oracle, orng));
  }
  Trained t;
  t.report = train(data, *dp.q, c.make_train_config(), oracle ? &*oracle : nullptr);
  {
    auto f = open_out(out / "curves.csv");
    write_curves_csv(t.report, f);
  }
  if (t.report.best) save_checkpoint(*t.report.best, out / "model_best.ckpt");
  save_checkpoint(t.report.final_state, out / "model_final.ckpt");

  ordered_json r;
  r["config"] = to_json(c);
  r["diverged"] = t.report.diverged;
  r["diagnostic"] = t.report.diagnostic;
  r["batches"] = t.report.batches;
  r["epochs_run"] = t.report.epochs_run;
  r["intervals"] = t.report.records.size();
  if (const auto b = t.report.best_record()) {
    const TrainRecord& rec = t.report.records[*b];
    r["best"] = ordered_json{{"interval", rec.interval},
                             {"epoch", rec.epoch},
                             {"lambda", rec.lambda},
                             {"monitor", rec.monitor},
                             {"mse_q", nullable(rec.mse_q)}};
  } else {
    r["best"] = nullptr;
  }
  write_json(out / "result.json", r);
  if (t.report.best) t.critic = t.report.best->to_critic();
  return t;
}

PowerSpec power_spec(const ExperimentConfig& c, const DistributionPair& dp) {
  PowerSpec s;
  s.p = dp.p;
  s.q = dp.q;
  s.train = c.make_train_config();
  s.n_train = c.train.n_train;
  s.n_val = c.train.n_val;
  s.n_run = c.power.n_run;
  s.n_replica = c.power.n_replica;
  s.gof = c.gof;
  s.seed = c.seed;
  if (c.train.n_oracle > 0) {
    s.fstar.emplace(dp.p, dp.q);
    s.n_oracle = c.train.n_oracle;
  }
  return s;
}

ordered_json power_json(const PowerReport& rep) {
  ordered_json reps = ordered_json::array();
  for (const auto& r : rep.replicas) {
    reps.push_back(ordered_json{{"replica", r.replica},
                                {"power", r.failed ? ordered_json(nullptr) : ordered_json(r.power)},
                                {"failed", r.failed},
                                {"diagnostic", r.diagnostic},
                                {"best_monitor", r.best_monitor},
                                {"best_lambda", r.best_lambda},
                                {"mse_q", nullable(r.mse_q)}});
  }
  return ordered_json{{"mean", rep.mean}, {"std", rep.std}, {"failed", rep.failed}, {"replicas", reps}};
}

}  // namespace

void write_error(const fs::path& out, const std::string& message) {
  std::error_code ec;
  fs::create_directories(out, ec);
  std::ofstream f(out / "error.json", std::ios::binary);
  if (f) f << ordered_json{{"error", message}}.dump(2) << '\n';
}

int cmd_train(const ExperimentConfig& c) {
  const fs::path out = prepare(c);
  const DistributionPair dp = build_distributions(c.distribution);
  const Trained t = train_from_config(c, dp, out);
  if (t.report.diverged) {
    write_error(out, t.report.diagnostic);
    std::cerr << ordered_json{{"error", t.report.diagnostic}}.dump() << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_gof(const ExperimentConfig& c) {
  const fs::path out = prepare(c);
  const DistributionPair dp = build_distributions(c.distribution);
  MlpCritic critic{1, 1};
  if (c.checkpoint) {
    critic = load_checkpoint(fs::path(*c.checkpoint)).to_critic();
    if (critic.dim() != dp.q->dim()) throw std::invalid_argument("gof: checkpoint dimension differs from q");
  } else {
    const Trained t = train_from_config(c, dp, out);
    if (t.report.diverged || !t.report.best) {
      write_error(out, t.report.diagnostic);
      return kExitDiverged;
    }
    critic = t.critic;
  }
  Rng rng = make_rng(c.seed, kTestStream);
  const SampleMatrix test = dp.p->sample(c.gof.n_gof, rng);
  const std::optional<DivMode> div = c.make_train_config().div_mode;
  const TestOutcome t = run_test(critic, *dp.q, test, *dp.q, c.gof, rng, nullptr, true, div);
  {
    auto f = open_out(out / "null_stats.csv");
    CsvWriter csv(f, {"index", "statistic"});
    for (std::size_t i = 0; i < t.null_stats.size(); ++i) csv.row(i, t.null_stats[i]);
  }
  {
    auto f = open_out(out / "witness.csv");
    write_witness_csv(make_witness_batch(critic, *dp.q, test, WitnessMode{*div, derive_seed(c.seed, kTestStream)},
                                         "p_test", c.checkpoint.value_or("trained")),
                      f);
  }
  write_json(out / "gof.json", ordered_json{{"statistic", t.statistic},
                                            {"threshold", t.threshold},
                                            {"reject", t.reject},
                                            {"n_gof", c.gof.n_gof},
                                            {"alpha", c.gof.alpha},
                                            {"n_boot", c.gof.n_boot},
                                            {"config", to_json(c)}});
  return kExitOk;
}

int cmd_power(const ExperimentConfig& c) {
  const fs::path out = prepare(c);
  const DistributionPair dp = build_distributions(c.distribution);
  const PowerSpec spec = power_spec(c, dp);
  const PowerReport rep = estimate_power(spec);
  {
    auto f = open_out(out / "power.csv");
    write_power_csv(rep, spec, f);
  }
  ordered_json r{{"config", to_json(c)}, {"schedule_id", spec.train.schedule.id()}};
  r["power"] = power_json(rep);
  write_json(out / "result.json", r);
  return rep.failed == rep.replicas.size() ? kExitDiverged : kExitOk;
}

int cmd_ksd(const ExperimentConfig& c) {
  const fs::path out = prepare(c);
  const DistributionPair dp = build_distributions(c.distribution);
  KsdSweepSpec s;
  s.p = dp.p;
  s.q = dp.q;
  s.n_sample = c.ksd.n_sample;
  s.deltas = c.ksd.deltas;
  s.alpha = c.gof.alpha;
  s.n_boot = c.ksd.n_boot;
  s.n_run = c.ksd.n_run;
  s.n_replica = c.ksd.n_replica;
  s.seed = c.seed;
  const KsdSweepReport rep = bandwidth_sweep(s);
  {
    auto f = open_out(out / "ksd.csv");
    CsvWriter csv(f, {"delta", "power_mean", "power_std", "sigma", "gamma", "statistic_seconds", "bootstrap_seconds"});
    for (const auto& r : rep.rows) {
      csv.row(r.delta, r.power_mean, r.power_std, r.sigma, r.gamma, r.statistic_seconds, r.bootstrap_seconds);
    }
  }
  {
    auto f = open_out(out / "sweep.csv");
    write_sweep_csv(rep, f);
  }
  write_json(out / "result.json", ordered_json{{"config", to_json(c)},
                                               {"best_delta", rep.rows[rep.best].delta},
                                               {"best_power", rep.rows[rep.best].power_mean}});
  return kExitOk;
}

int cmd_ntk(const ExperimentConfig& c) {
  const fs::path out = prepare(c);
  const LazySpec spec = c.make_lazy_spec();
  const auto reports = lazy_deviation(spec);
  {
    auto f = open_out(out / "lazy.csv");
    write_lazy_csv(reports, f);
  }
  const auto med = median_final_deviation(spec, reports);
  bool monotone = true;
  for (std::size_t i = 1; i < med.size(); ++i) monotone = monotone && med[i] < med[i - 1];
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < med.size(); ++i) {
    rows.push_back(ordered_json{{"lambda", spec.lambdas[i]}, {"median_dev_rel", med[i]}});
  }
  write_json(out / "result.json",
             ordered_json{{"config", to_json(c)}, {"median_final", rows}, {"strictly_decreasing", monotone}});
  return kExitOk;
}

int cmd_sweep_split(const ExperimentConfig& c) {
  const fs::path out = prepare(c);
  const DistributionPair dp = build_distributions(c.distribution);
  auto f = open_out(out / "split_power.csv");
  CsvWriter csv(f, {"fraction", "n_train", "n_val", "n_gof", "batch", "power_mean", "power_std"});
  ordered_json rows = ordered_json::array();
  for (double frac : c.split.fractions) {
    if (!(frac > 0.0 && frac < 1.0)) throw std::invalid_argument("sweep-split: fraction must lie in (0, 1)");
    const auto n = static_cast<double>(c.split.n_sample);
    const auto n_part = static_cast<std::size_t>(std::llround(frac * n));
    const auto n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n_part)));
    const std::size_t n_train = n_part - n_val;
    const std::size_t n_gof = c.split.n_sample - n_part;
    if (n_train < 1 || n_val < 1 || n_gof < 1) {
      throw std::invalid_argument("sweep-split: fraction " + format_double(frac) + " leaves an empty partition");
    }
    PowerSpec s = power_spec(c, dp);
    s.n_train = n_train;
    s.n_val = n_val;
    s.gof.n_gof = n_gof;
    s.train.batch_size = std::min(s.train.batch_size, n_train);
    const PowerReport rep = estimate_power(s);
    csv.row(frac, n_train, n_val, n_gof, s.train.batch_size, rep.mean, rep.std);
    rows.push_back(ordered_json{{"fraction", frac}, {"power", power_json(rep)}});
  }
  write_json(out / "result.json", ordered_json{{"config", to_json(c)}, {"splits", rows}});
  return kExitOk;
}

int run_command(const std::string& verb, const ExperimentConfig& c) {
  if (verb == "train") return cmd_train(c);
  if (verb == "gof") return cmd_gof(c);
  if (verb == "power") return cmd_power(c);
  if (verb == "ksd") return cmd_ksd(c);
  if (verb == "ntk") return cmd_ntk(c);
  if (verb == "sweep-split") return cmd_sweep_split(c);
  throw std::invalid_argument("unknown command '" + verb + "'");
}

}  // namespace nsc
