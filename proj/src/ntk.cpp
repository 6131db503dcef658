#include "nsc/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "nsc/csv.hpp"
#include "nsc/distributions.hpp"
#include "nsc/parallel.hpp"

namespace nsc {

namespace {

void check_size(Eigen::Index size) {
  if (size > kMaxNtkSize) {
    throw std::invalid_argument("ntk: n*d = " + std::to_string(size) + " exceeds the dense limit of " +
                                std::to_string(kMaxNtkSize) + "; reduce n");
  }
}

// Step count and snapshot step indices shared by both integrators.
struct Grid {
  long long steps;
  double step;
  std::vector<long long> marks;  // sorted, last == steps
};

Grid make_grid(double t_end, double eta, const std::vector<double>& snapshots) {
  if (!(t_end >= 0.0) || !(eta > 0.0)) throw std::invalid_argument("ntk: need t_end >= 0 and eta > 0");
  Grid g;
  g.steps = static_cast<long long>(std::ceil(t_end / eta - 1e-9));
  g.step = g.steps > 0 ? t_end / static_cast<double>(g.steps) : eta;
  for (double t : snapshots) {
    if (t < 0.0 || t > t_end * (1.0 + 1e-12)) throw std::invalid_argument("ntk: snapshot outside [0, t_end]");
    g.marks.push_back(std::llround(t / g.step));
  }
  g.marks.push_back(g.steps);
  std::sort(g.marks.begin(), g.marks.end());
  g.marks.erase(std::unique(g.marks.begin(), g.marks.end()), g.marks.end());
  return g;
}

double largest_eigenvalue(const Matrix& g, Eigen::Index n) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(g / static_cast<double>(n), Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

SampleMatrix unstack(const Vector& v, Eigen::Index n, int d) {
  SampleMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i) = v.segment(i * d, d).transpose();
  return m;
}

}  // namespace

Vector stack(const SampleMatrix& values) {
  return Eigen::Map<const Vector>(values.data(), values.size());
}

double empirical_norm(const Vector& stacked, Eigen::Index n) {
  return std::sqrt(stacked.squaredNorm() / static_cast<double>(n));
}

NtkGram ntk_gram(const MlpCritic& critic, const SampleMatrix& points, std::string snapshot) {
  const int d = critic.dim();
  if (points.cols() != d) throw std::invalid_argument("ntk_gram: dimension mismatch");
  const Eigen::Index n = points.rows();
  check_size(n * d);
  Matrix jac(n * d, static_cast<Eigen::Index>(critic.param_count()));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    jac.middleRows(r * d, d) = critic.param_jacobian(points.row(r).transpose());
  });
  NtkGram out;
  out.points = points;
  out.g = jac * jac.transpose();
  out.g = 0.5 * (out.g + out.g.transpose()).eval();
  out.snapshot = std::move(snapshot);
  return out;
}

EigSystem eig_sym_psd(const Matrix& g, Eigen::Index n) {
  if (g.rows() != g.cols()) throw std::invalid_argument("eig_sym_psd: matrix not square");
  if (n < 1) throw std::invalid_argument("eig_sym_psd: n must be >= 1");
  check_size(g.rows());
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("eig_sym_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(g / static_cast<double>(n));
  if (es.info() != Eigen::Success) throw std::runtime_error("eig_sym_psd: eigensolver failed");
  const Eigen::Index m = g.rows();
  EigSystem out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  const double top = std::max(0.0, out.values[0]);
  for (Eigen::Index k = 0; k < m; ++k) {
    if (out.values[k] < -1e-8 * top) throw std::domain_error("eig_sym_psd: matrix is not positive semidefinite");
    out.values[k] = std::max(0.0, out.values[k]);
  }
  return out;
}

Trajectory kernel_ode_euler(const Matrix& g, Eigen::Index n, const Vector& fstar, double lambda, double t_end,
                            double eta, const std::vector<double>& snapshot_times) {
  if (g.rows() != g.cols() || g.rows() != fstar.size()) throw std::invalid_argument("kernel_ode: shape mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("kernel_ode: lambda must be positive");
  const Grid grid = make_grid(t_end, eta, snapshot_times);
  const double mu_max = largest_eigenvalue(g, n);
  if (grid.step * lambda * mu_max >= 2.0) throw std::domain_error("kernel_ode: step violates eta*lambda*mu_max < 2");
  const Matrix a = g / static_cast<double>(n);
  Trajectory out;
  out.step = grid.step;
  out.steps = grid.steps;
  Vector v = Vector::Zero(fstar.size());
  long long done = 0;
  for (long long mark : grid.marks) {
    for (; done < mark; ++done) v.noalias() -= grid.step * (a * (lambda * v - fstar));
    if (!v.allFinite()) throw std::domain_error("kernel_ode: iterate diverged");
    out.times.push_back(static_cast<double>(mark) * grid.step);
    out.values.push_back(v);
  }
  return out;
}

Vector spectral_solution(const EigSystem& eig, const Vector& fstar, double lambda, double t) {
  if (eig.vectors.rows() != fstar.size()) throw std::invalid_argument("spectral_solution: shape mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("spectral_solution: lambda must be positive");
  const Vector c = eig.vectors.transpose() * fstar;
  Vector w(c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) w[k] = c[k] * -std::expm1(-t * lambda * eig.values[k]);
  return eig.vectors * w / lambda;
}

Trajectory gd_trajectory(MlpCritic critic, const SampleMatrix& points, const Vector& fstar, double lambda,
                         double t_end, double eta, const std::vector<double>& snapshot_times, GdObjective objective,
                         const ScoreField* q) {
  const int d = critic.dim();
  const Eigen::Index n = points.rows();
  if (points.cols() != d || fstar.size() != n * d) throw std::invalid_argument("gd_trajectory: shape mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("gd_trajectory: lambda must be positive");
  if (objective == GdObjective::kEmpiricalStein && q == nullptr) {
    throw std::invalid_argument("gd_trajectory: empirical objective needs q");
  }
  const Grid grid = make_grid(t_end, eta, snapshot_times);
  const SampleMatrix target = unstack(fstar, n, d);
  SampleMatrix scores;
  if (q != nullptr) scores = q->score_batch(points);

  Trajectory out;
  out.step = grid.step;
  out.steps = grid.steps;
  Vector theta = critic.params();
  long long done = 0;
  for (long long mark : grid.marks) {
    for (; done < mark; ++done) {
      ParamVector grad;
      if (objective == GdObjective::kPopulation) {
        const SampleMatrix u = critic.forward_batch(points);
        grad = critic.output_vjp(points, (lambda * u - target) / static_cast<double>(n));
      } else {
        grad = critic.loss_and_grad(points, scores, lambda).grad;
      }
      if (!grad.allFinite()) throw NonFiniteError("gd_trajectory: non-finite gradient");
      theta -= grid.step * grad;
      critic.set_params(theta);
    }
    out.times.push_back(static_cast<double>(mark) * grid.step);
    out.values.push_back(stack(critic.forward_batch(points)));
  }
  return out;
}

void LazySpec::validate() const {
  if (width < 1 || d < 1 || n < 1) throw std::invalid_argument("lazy: width, d and n must be >= 1");
  check_size(n * d);
  if (lambdas.empty()) throw std::invalid_argument("lazy: empty lambda grid");
  for (double l : lambdas) {
    if (!(l > 0.0)) throw std::invalid_argument("lazy: lambdas must be positive");
  }
  if (!(c > 0.0)) throw std::invalid_argument("lazy: c must be positive");
  if (seeds.empty()) throw std::invalid_argument("lazy: no seeds");
  if (!(eta_factor > 0.0 && eta_factor < 2.0)) throw std::invalid_argument("lazy: eta_factor must lie in (0, 2)");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("lazy: fractions must lie in (0, 1]");
  }
}

std::vector<LazyRunReport> lazy_deviation(const LazySpec& spec) {
  spec.validate();
  const MixturePair pair = make_benchmark_mixture(spec.d, spec.rho1, spec.omega);
  auto p = std::make_shared<GaussianMixture>(pair.p);
  auto q = std::make_shared<GaussianMixture>(pair.q);
  const OptimalCritic fstar_fn(p, q);
  const std::size_t n_seed = spec.seeds.size();
  const std::size_t cells = spec.lambdas.size() * n_seed;

  // Per-seed setup is shared by every λ.
  struct Setup {
    MlpCritic critic{1, 1};
    SampleMatrix points;
    Vector fstar;
    Matrix g;
    double mu_max = 0.0;
  };
  std::vector<Setup> setups(n_seed);
  parallel_for(n_seed, [&](std::size_t s) {
    Setup& st = setups[s];
    Rng init_rng = make_rng(spec.seeds[s], 0);
    st.critic = MlpCritic::init(spec.d, spec.width, init_rng);
    st.critic.enable_centering();
    Rng data_rng = make_rng(spec.seeds[s], 1);
    st.points = p->sample(static_cast<std::size_t>(spec.n), data_rng);
    st.fstar = stack(fstar_fn.batch(st.points));
    st.g = ntk_gram(st.critic, st.points).g;
    st.mu_max = largest_eigenvalue(st.g, spec.n);
  });

  std::vector<LazyRunReport> reports(cells);
  parallel_for(cells, [&](std::size_t cell) {
    const std::size_t li = cell / n_seed;
    const Setup& st = setups[cell % n_seed];
    const double lambda = spec.lambdas[li];
    const double t_end = spec.c / lambda;
    const double eta = spec.eta_factor / (lambda * st.mu_max);
    std::vector<double> snaps;
    for (double f : spec.fractions) snaps.push_back(f * t_end);
    const Trajectory gd =
        gd_trajectory(st.critic, st.points, st.fstar, lambda, t_end, eta, snaps, spec.objective, q.get());
    const Trajectory ode = kernel_ode_euler(st.g, spec.n, st.fstar, lambda, t_end, eta, snaps);

    LazyRunReport& r = reports[cell];
    r.lambda = lambda;
    r.seed = spec.seeds[cell % n_seed];
    r.width = spec.width;
    r.n = spec.n;
    r.eta = gd.step;
    r.steps = gd.steps;
    r.mu_max = st.mu_max;
    r.fstar_norm = empirical_norm(st.fstar, spec.n);
    for (std::size_t k = 0; k < gd.times.size(); ++k) {
      if (gd.times[k] <= 0.0) continue;
      const double dev = empirical_norm(lambda * (gd.values[k] - ode.values[k]), spec.n);
      r.times.push_back(gd.times[k]);
      r.dev.push_back(dev);
      r.dev_rel.push_back(dev / r.fstar_norm);
      r.ubar_err.push_back(empirical_norm(lambda * ode.values[k] - st.fstar, spec.n));
    }
  });
  return reports;
}

std::vector<double> median_final_deviation(const LazySpec& spec, const std::vector<LazyRunReport>& reports) {
  std::vector<double> out;
  for (double lambda : spec.lambdas) {
    std::vector<double> vals;
    for (const auto& r : reports) {
      if (r.lambda == lambda && !r.dev_rel.empty()) vals.push_back(r.dev_rel.back());
    }
    if (vals.empty()) {
      out.push_back(std::nan(""));
      continue;
    }
    std::sort(vals.begin(), vals.end());
    const std::size_t m = vals.size();
    out.push_back(m % 2 ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]));
  }
  return out;
}

void write_lazy_csv(const std::vector<LazyRunReport>& reports, std::ostream& out) {
  CsvWriter csv(out, {"lambda", "t", "dev_rel", "ubar_err", "seed", "width", "n"});
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < r.times.size(); ++k) {
      csv.row(r.lambda, r.times[k], r.dev_rel[k], r.ubar_err[k], r.seed, r.width, static_cast<long long>(r.n));
    }
  }
}

}  // namespace nsc
