#include "nsc/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace nsc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config: " + path + ": " + what);
}

// Reads typed fields from one JSON object and remembers which keys were
// consumed, so leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& dst) {
    if (const json* v = child(key)) dst = convert<T>(*v, at(key));
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& dst) {
    if (const json* v = child(key)) dst = convert<T>(*v, at(key));
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
        if (v.get<std::int64_t>() >= 0) return static_cast<T>(v.get<std::int64_t>());
        fail(path, "expected a non-negative integer");
      } else {
        return static_cast<T>(v.get<std::int64_t>());
      }
    } else {
      // std::vector<...>
      if (!v.is_array()) fail(path, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

MixtureSpec parse_mixture(const json& j, const std::string& path) {
  Section s(j, path);
  MixtureSpec m;
  s.read("weights", m.weights);
  s.read("means", m.means);
  s.read("covariances", m.covariances);
  s.finish();
  return m;
}

ordered_json mixture_json(const MixtureSpec& m) {
  ordered_json j;
  j["weights"] = m.weights;
  j["means"] = m.means;
  j["covariances"] = m.covariances;
  return j;
}

GaussianMixture build_mixture(const MixtureSpec& m, const std::string& which) {
  const std::size_t k = m.weights.size();
  if (k == 0 || m.means.size() != k || m.covariances.size() != k) {
    throw std::invalid_argument("config: distribution." + which + ": weights, means and covariances must agree");
  }
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t c = 0; c < k; ++c) {
    const auto d = static_cast<Eigen::Index>(m.means[c].size());
    means.push_back(Eigen::Map<const Vector>(m.means[c].data(), d));
    if (m.covariances[c].size() != m.means[c].size()) {
      throw std::invalid_argument("config: distribution." + which + ": covariance shape mismatch");
    }
    Matrix cov(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const auto& row = m.covariances[c][static_cast<std::size_t>(r)];
      if (static_cast<Eigen::Index>(row.size()) != d) {
        throw std::invalid_argument("config: distribution." + which + ": covariance shape mismatch");
      }
      for (Eigen::Index col = 0; col < d; ++col) cov(r, col) = row[static_cast<std::size_t>(col)];
    }
    covs.push_back(cov);
  }
  return GaussianMixture(m.weights, std::move(means), std::move(covs));
}

DivMode parse_div_mode(const std::string& name, int probes, int d) {
  if (name == "auto") return default_div_mode(d);
  if (name == "exact") return DivMode::exact();
  if (name == "hutchinson") return DivMode::hutchinson(probes);
  throw std::invalid_argument("config: train.div_mode: expected auto, exact or hutchinson");
}

}  // namespace

DistributionPair build_distributions(const DistributionSpec& s) {
  DistributionPair out;
  if (s.kind == "benchmark_mixture") {
    if (s.d < 2) throw std::invalid_argument("config: distribution.d: benchmark_mixture needs d >= 2");
    MixturePair pair = make_benchmark_mixture(s.d, s.rho1, s.omega);
    out.p = std::make_shared<GaussianMixture>(std::move(pair.p));
    out.q = std::make_shared<GaussianMixture>(std::move(pair.q));
  } else if (s.kind == "gaussian_mixture") {
    if (!s.p || !s.q) throw std::invalid_argument("config: distribution: gaussian_mixture needs p and q");
    auto p = std::make_shared<GaussianMixture>(build_mixture(*s.p, "p"));
    auto q = std::make_shared<GaussianMixture>(build_mixture(*s.q, "q"));
    if (p->dim() != q->dim()) throw std::invalid_argument("config: distribution: p and q dimensions differ");
    out.p = p;
    out.q = q;
  } else if (s.kind == "rbm") {
    if (s.d < 1 || s.hidden < 1) throw std::invalid_argument("config: distribution: rbm needs d, hidden >= 1");
    if (s.gibbs_sweeps < 1) throw std::invalid_argument("config: distribution.gibbs_sweeps must be >= 1");
    Rng rng = make_rng(s.structure_seed, 0);
    Matrix b_q(s.d, s.hidden);
    for (Eigen::Index i = 0; i < b_q.size(); ++i) b_q.data()[i] = rademacher(rng);
    Vector b(s.d);
    Vector c(s.hidden);
    for (auto& v : b) v = standard_normal(rng);
    for (auto& v : c) v = standard_normal(rng);
    Matrix b_p = b_q;
    for (Eigen::Index i = 0; i < b_p.size(); ++i) b_p.data()[i] += s.perturbation * standard_normal(rng);
    out.q = std::make_shared<GaussBernoulliRBM>(b_q, b, c, s.gibbs_sweeps);
    out.p = std::make_shared<GaussBernoulliRBM>(b_p, b, c, s.gibbs_sweeps);
  } else {
    throw std::invalid_argument("config: distribution.kind: expected benchmark_mixture, gaussian_mixture or rbm");
  }
  if (s.null) out.p = out.q;
  return out;
}

void ExperimentConfig::validate() const {
  build_distributions(distribution);
  if (width < 1) throw std::invalid_argument("config: net.width must be >= 1");
  make_train_config().validate(train.n_train);
  if (train.n_val < 1) throw std::invalid_argument("config: train.n_val must be >= 1");
  if (train.probes < 1) throw std::invalid_argument("config: train.probes must be >= 1");
  gof.validate();
  if (power.n_run < 1) throw std::invalid_argument("config: power.n_run must be >= 1");
  if (power.n_replica < 1) throw std::invalid_argument("config: power.n_replica must be >= 1");
  if (ksd.deltas.empty()) throw std::invalid_argument("config: ksd.deltas must be nonempty");
  for (double dl : ksd.deltas) {
    if (!(dl > 0.0)) throw std::invalid_argument("config: ksd.deltas must be positive");
  }
  if (ksd.n_boot < 1 || ksd.n_run < 1 || ksd.n_replica < 1) {
    throw std::invalid_argument("config: ksd counts must be >= 1");
  }
  if (ksd.n_sample < 2) throw std::invalid_argument("config: ksd.n_sample must be >= 2");
  if (ntk.objective != "population" && ntk.objective != "empirical_stein") {
    throw std::invalid_argument("config: ntk.objective: expected population or empirical_stein");
  }
  if (ntk.n < 1 || ntk.width < 1) throw std::invalid_argument("config: ntk.n and ntk.width must be >= 1");
  if (ntk.lambdas.empty() || ntk.seeds.empty()) throw std::invalid_argument("config: ntk grids must be nonempty");
  if (split.fractions.empty()) throw std::invalid_argument("config: split.fractions must be nonempty");
  for (double f : split.fractions) {
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("config: split.fractions must lie strictly in (0, 1)");
  }
  if (split.n_sample < 2) throw std::invalid_argument("config: split.n_sample must be >= 2");
  if (out.empty()) throw std::invalid_argument("config: out must be nonempty");
}

LambdaSchedule ExperimentConfig::make_schedule() const {
  const auto& s = schedule;
  try {
    if (s.kind == "fixed") return LambdaSchedule::fixed(s.lambda);
    if (s.kind == "staged") return LambdaSchedule::staged(s.lambda_init, s.lambda_term, s.beta);
    if (s.kind == "adaptive") return LambdaSchedule::adaptive(s.lambda_init, s.lambda_term, s.beta);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: schedule: ") + e.what());
  }
  throw std::invalid_argument("config: schedule.kind: expected fixed, staged or adaptive");
}

TrainConfig ExperimentConfig::make_train_config() const {
  TrainConfig tc;
  tc.width = width;
  tc.batch_size = train.batch;
  tc.lr = train.lr;
  tc.epochs = train.epochs;
  tc.batches_per_interval = train.batches_per_interval;
  tc.schedule = make_schedule();
  const int d = distribution.kind == "gaussian_mixture" && distribution.q && !distribution.q->means.empty()
                    ? static_cast<int>(distribution.q->means.front().size())
                    : distribution.d;
  tc.div_mode = parse_div_mode(train.div_mode, train.probes, d);
  if (train.optimizer == "adam") {
    tc.optimizer = Optimizer::kAdam;
  } else if (train.optimizer == "sgd") {
    tc.optimizer = Optimizer::kSgd;
  } else {
    throw std::invalid_argument("config: train.optimizer: expected adam or sgd");
  }
  tc.seed = seed;
  return tc;
}

LazySpec ExperimentConfig::make_lazy_spec() const {
  if (distribution.kind != "benchmark_mixture") {
    throw std::invalid_argument("config: ntk runs need distribution.kind = benchmark_mixture");
  }
  LazySpec s;
  s.width = ntk.width;
  s.n = ntk.n;
  s.d = distribution.d;
  s.rho1 = distribution.rho1;
  s.omega = distribution.omega;
  s.lambdas = ntk.lambdas;
  s.c = ntk.c;
  s.seeds = ntk.seeds;
  s.eta_factor = ntk.eta_factor;
  s.objective = ntk.objective == "empirical_stein" ? GdObjective::kEmpiricalStein : GdObjective::kPopulation;
  return s;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section root(j, "");
  root.read("seed", c.seed);
  root.read("out", c.out);
  root.read("checkpoint", c.checkpoint);
  if (const json* v = root.child("distribution")) {
    Section s(*v, "distribution");
    auto& d = c.distribution;
    s.read("kind", d.kind);
    s.read("d", d.d);
    s.read("rho1", d.rho1);
    s.read("omega", d.omega);
    if (const json* p = s.child("p")) d.p = parse_mixture(*p, "distribution.p");
    if (const json* q = s.child("q")) d.q = parse_mixture(*q, "distribution.q");
    s.read("hidden", d.hidden);
    s.read("perturbation", d.perturbation);
    s.read("structure_seed", d.structure_seed);
    s.read("gibbs_sweeps", d.gibbs_sweeps);
    s.read("null", d.null);
    s.finish();
  }
  if (const json* v = root.child("net")) {
    Section s(*v, "net");
    s.read("width", c.width);
    s.finish();
  }
  if (const json* v = root.child("train")) {
    Section s(*v, "train");
    auto& t = c.train;
    s.read("lr", t.lr);
    s.read("batch", t.batch);
    s.read("epochs", t.epochs);
    s.read("batches_per_interval", t.batches_per_interval);
    s.read("div_mode", t.div_mode);
    s.read("probes", t.probes);
    s.read("optimizer", t.optimizer);
    s.read("n_train", t.n_train);
    s.read("n_val", t.n_val);
    s.read("n_oracle", t.n_oracle);
    s.finish();
  }
  if (const json* v = root.child("schedule")) {
    Section s(*v, "schedule");
    auto& t = c.schedule;
    s.read("kind", t.kind);
    s.read("lambda", t.lambda);
    s.read("lambda_init", t.lambda_init);
    s.read("lambda_term", t.lambda_term);
    s.read("beta", t.beta);
    s.finish();
  }
  if (const json* v = root.child("gof")) {
    Section s(*v, "gof");
    s.read("n_gof", c.gof.n_gof);
    s.read("alpha", c.gof.alpha);
    s.read("n_boot", c.gof.n_boot);
    s.read("r_pool", c.gof.r_pool);
    s.read("reuse_pool", c.gof.reuse_pool);
    s.finish();
  }
  if (const json* v = root.child("power")) {
    Section s(*v, "power");
    s.read("n_run", c.power.n_run);
    s.read("n_replica", c.power.n_replica);
    s.finish();
  }
  if (const json* v = root.child("ksd")) {
    Section s(*v, "ksd");
    s.read("deltas", c.ksd.deltas);
    s.read("n_boot", c.ksd.n_boot);
    s.read("n_sample", c.ksd.n_sample);
    s.read("n_run", c.ksd.n_run);
    s.read("n_replica", c.ksd.n_replica);
    s.finish();
  }
  if (const json* v = root.child("ntk")) {
    Section s(*v, "ntk");
    long long n = c.ntk.n;
    s.read("n", n);
    c.ntk.n = static_cast<Eigen::Index>(n);
    s.read("width", c.ntk.width);
    s.read("lambdas", c.ntk.lambdas);
    s.read("c", c.ntk.c);
    s.read("eta_factor", c.ntk.eta_factor);
    s.read("seeds", c.ntk.seeds);
    s.read("objective", c.ntk.objective);
    s.finish();
  }
  if (const json* v = root.child("split")) {
    Section s(*v, "split");
    s.read("fractions", c.split.fractions);
    s.read("n_sample", c.split.n_sample);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  const auto& d = c.distribution;
  ordered_json dist;
  dist["kind"] = d.kind;
  dist["d"] = d.d;
  dist["rho1"] = d.rho1;
  dist["omega"] = d.omega;
  if (d.p) dist["p"] = mixture_json(*d.p);
  if (d.q) dist["q"] = mixture_json(*d.q);
  dist["hidden"] = d.hidden;
  dist["perturbation"] = d.perturbation;
  dist["structure_seed"] = d.structure_seed;
  dist["gibbs_sweeps"] = d.gibbs_sweeps;
  dist["null"] = d.null;
  j["distribution"] = dist;
  j["net"] = {{"width", c.width}};
  j["train"] = ordered_json{{"lr", c.train.lr},
                            {"batch", c.train.batch},
                            {"epochs", c.train.epochs},
                            {"batches_per_interval", c.train.batches_per_interval},
                            {"div_mode", c.train.div_mode},
                            {"probes", c.train.probes},
                            {"optimizer", c.train.optimizer},
                            {"n_train", c.train.n_train},
                            {"n_val", c.train.n_val},
                            {"n_oracle", c.train.n_oracle}};
  j["schedule"] = ordered_json{{"kind", c.schedule.kind},
                               {"lambda", c.schedule.lambda},
                               {"lambda_init", c.schedule.lambda_init},
                               {"lambda_term", c.schedule.lambda_term},
                               {"beta", c.schedule.beta}};
  j["gof"] = ordered_json{{"n_gof", c.gof.n_gof},
                          {"alpha", c.gof.alpha},
                          {"n_boot", c.gof.n_boot},
                          {"r_pool", c.gof.r_pool},
                          {"reuse_pool", c.gof.reuse_pool}};
  j["power"] = ordered_json{{"n_run", c.power.n_run}, {"n_replica", c.power.n_replica}};
  j["ksd"] = ordered_json{{"deltas", c.ksd.deltas},
                          {"n_boot", c.ksd.n_boot},
                          {"n_sample", c.ksd.n_sample},
                          {"n_run", c.ksd.n_run},
                          {"n_replica", c.ksd.n_replica}};
  j["ntk"] = ordered_json{{"n", static_cast<long long>(c.ntk.n)},
                          {"width", c.ntk.width},
                          {"lambdas", c.ntk.lambdas},
                          {"c", c.ntk.c},
                          {"eta_factor", c.ntk.eta_factor},
                          {"seeds", c.ntk.seeds},
                          {"objective", c.ntk.objective}};
  j["split"] = ordered_json{{"fractions", c.split.fractions}, {"n_sample", c.split.n_sample}};
  if (c.checkpoint) j["checkpoint"] = *c.checkpoint;
  j["out"] = c.out;
  return j;
}

}  // namespace nsc
