#include "nsc/ksd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "nsc/csv.hpp"
#include "nsc/parallel.hpp"

namespace nsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Replicas per multiplier block; keeps the n×B block modest.
constexpr std::size_t kBootBlock = 128;

}  // namespace

RbfKernel RbfKernel::from_sigma(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("rbf: bandwidth must be positive");
  return RbfKernel{1.0 / (2.0 * sigma * sigma)};
}

double RbfKernel::sigma() const { return std::sqrt(1.0 / (2.0 * gamma)); }

RbfKernel RbfKernel::scaled(double delta) const {
  if (!(delta > 0.0)) throw std::invalid_argument("rbf: delta must be positive");
  return RbfKernel{gamma / delta};
}

double RbfKernel::operator()(const Vector& x, const Vector& y) const {
  return std::exp(-gamma * (x - y).squaredNorm());
}

Vector RbfKernel::grad_x(const Vector& x, const Vector& y) const {
  return -2.0 * gamma * (x - y) * (*this)(x, y);
}

Vector RbfKernel::grad_y(const Vector& x, const Vector& y) const {
  return 2.0 * gamma * (x - y) * (*this)(x, y);
}

double RbfKernel::trace_mixed(const Vector& x, const Vector& y) const {
  const double r2 = (x - y).squaredNorm();
  const auto d = static_cast<double>(x.size());
  return (2.0 * gamma * d - 4.0 * gamma * gamma * r2) * std::exp(-gamma * r2);
}

double u_q(const Vector& x, const Vector& y, const Vector& sx, const Vector& sy, const RbfKernel& k) {
  if (x.size() != y.size() || sx.size() != x.size() || sy.size() != y.size()) {
    throw std::invalid_argument("u_q: dimension mismatch");
  }
  const Vector diff = x - y;
  const double r2 = diff.squaredNorm();
  const double kv = std::exp(-k.gamma * r2);
  const double g = k.gamma;
  const auto d = static_cast<double>(x.size());
  return kv * (sx.dot(sy) + 2.0 * g * sx.dot(diff) - 2.0 * g * diff.dot(sy) + 2.0 * g * d - 4.0 * g * g * r2);
}

double u_q(const Vector& x, const Vector& y, const ScoreField& q, const RbfKernel& k) {
  return u_q(x, y, q.score(x), q.score(y), k);
}

Matrix u_matrix(const SampleMatrix& x, const SampleMatrix& s, const RbfKernel& k) {
  if (x.rows() != s.rows() || x.cols() != s.cols()) throw std::invalid_argument("u_matrix: shape mismatch");
  const auto n = x.rows();
  const double g = k.gamma;
  const auto d = static_cast<double>(x.cols());
  const Vector sq = x.rowwise().squaredNorm();
  Matrix r2 = (sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * (x * x.transpose())).cwiseMax(0.0);
  r2.diagonal().setZero();
  const Matrix kern = (-g * r2).array().exp().matrix();
  const Matrix ss = s * s.transpose();
  const Matrix sx = s * x.transpose();  // (i, j) = s_i · x_j
  const Vector own = sx.diagonal();     // s_i · x_i
  Matrix u(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      // s_i·(x_i − x_j) and (x_i − x_j)·s_j
      const double a = own[i] - sx(i, j);
      const double b = sx(j, i) - own[j];
      u(i, j) = kern(i, j) * (ss(i, j) + 2.0 * g * a - 2.0 * g * b + 2.0 * g * d - 4.0 * g * g * r2(i, j));
    }
  }
  return u;
}

double v_statistic(const SampleMatrix& samples, const ScoreField& q, const RbfKernel& k) {
  if (samples.rows() < 1) throw std::invalid_argument("v_statistic: empty sample");
  return statistic_from_u(u_matrix(samples, q.score_batch(samples), k));
}

RbfKernel median_bandwidth(const SampleMatrix& x) {
  const auto n = x.rows();
  if (n < 2) throw std::invalid_argument("median_bandwidth: need at least two points");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((x.row(i) - x.row(j)).norm());
  }
  const std::size_t m = dist.size();
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(m / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double sigma = *mid;
  if (m % 2 == 0) sigma = 0.5 * (sigma + *std::max_element(dist.begin(), mid));
  if (!(sigma > 0.0)) throw std::domain_error("median_bandwidth: median distance is zero");
  return RbfKernel::from_sigma(sigma);
}

std::vector<double> wild_bootstrap_stats(const Matrix& u, const Matrix& w) {
  if (u.rows() != u.cols() || w.rows() != u.rows()) throw std::invalid_argument("wild bootstrap: shape mismatch");
  const auto n = static_cast<double>(u.rows());
  const Matrix uw = u * w;
  std::vector<double> stats(static_cast<std::size_t>(w.cols()));
  for (Eigen::Index b = 0; b < w.cols(); ++b) stats[static_cast<std::size_t>(b)] = w.col(b).dot(uw.col(b)) / (n * n);
  return stats;
}

double statistic_from_u(const Matrix& u) {
  // Same arithmetic as a bootstrap replica with all multipliers equal to one.
  return wild_bootstrap_stats(u, Matrix::Ones(u.rows(), 1)).front();
}

std::vector<double> wild_bootstrap_stats(const Matrix& u, std::size_t n_boot, Rng& rng) {
  const auto n = u.rows();
  std::vector<double> stats;
  stats.reserve(n_boot);
  for (std::size_t start = 0; start < n_boot; start += kBootBlock) {
    const auto block = static_cast<Eigen::Index>(std::min(kBootBlock, n_boot - start));
    Matrix w(n, block);
    for (Eigen::Index b = 0; b < block; ++b) {
      for (Eigen::Index i = 0; i < n; ++i) w(i, b) = rademacher(rng);
    }
    const auto part = wild_bootstrap_stats(u, w);
    stats.insert(stats.end(), part.begin(), part.end());
  }
  return stats;
}

TestOutcome ksd_test(const SampleMatrix& samples, const ScoreField& q, const RbfKernel& k, double alpha,
                     std::size_t n_boot, Rng& rng, KsdTiming* timing, bool keep_null) {
  if (samples.rows() < 1) throw std::invalid_argument("ksd_test: empty sample");
  if (n_boot < 1) throw std::invalid_argument("ksd_test: n_boot must be >= 1");
  const auto t0 = Clock::now();
  const Matrix u = u_matrix(samples, q.score_batch(samples), k);
  TestOutcome out;
  out.statistic = statistic_from_u(u);
  const auto t1 = Clock::now();
  std::vector<double> stats = wild_bootstrap_stats(u, n_boot, rng);
  out.threshold = threshold(stats, alpha);
  out.reject = out.statistic > out.threshold;
  if (timing != nullptr) {
    timing->statistic_seconds = std::chrono::duration<double>(t1 - t0).count();
    timing->bootstrap_seconds = seconds_since(t1);
  }
  if (keep_null) out.null_stats = std::move(stats);
  return out;
}

void KsdSweepSpec::validate() const {
  if (!p || !q) throw std::invalid_argument("ksd: p and q are required");
  if (p->dim() != q->dim()) throw std::invalid_argument("ksd: dimension mismatch");
  if (!p->can_sample()) throw std::invalid_argument("ksd: p must be samplable");
  if (deltas.empty()) throw std::invalid_argument("ksd: empty delta grid");
  for (double dl : deltas) {
    if (!(dl > 0.0)) throw std::invalid_argument("ksd: deltas must be positive");
  }
  if (n_sample < 2) throw std::invalid_argument("ksd: n_sample must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ksd: alpha must lie in (0, 1)");
  if (n_boot < 1 || n_run < 1 || n_replica < 1) throw std::invalid_argument("ksd: counts must be >= 1");
}

KsdSweepReport bandwidth_sweep(const KsdSweepSpec& spec) {
  spec.validate();
  const std::size_t nd = spec.deltas.size();
  const std::size_t total = spec.n_replica * spec.n_run;
  // reject[run][delta], plus per-run σ and timings
  std::vector<std::vector<char>> reject(total, std::vector<char>(nd, 0));
  std::vector<double> sigmas(total, 0.0);
  std::vector<double> t_stat(total, 0.0);
  std::vector<double> t_boot(total, 0.0);
  parallel_for(total, [&](std::size_t j) {
    Rng data_rng = make_rng(spec.seed, 2 * j);
    const SampleMatrix xs = spec.p->sample(spec.n_sample, data_rng);
    const auto t0 = Clock::now();
    const SampleMatrix scores = spec.q->score_batch(xs);
    const RbfKernel base = median_bandwidth(xs);
    const double score_time = seconds_since(t0);
    sigmas[j] = base.sigma();
    const auto n = static_cast<double>(xs.rows());
    for (std::size_t di = 0; di < nd; ++di) {
      Rng boot_rng = make_rng(spec.seed, 2 * j + 1);
      const auto t1 = Clock::now();
      const Matrix u = u_matrix(xs, scores, base.scaled(spec.deltas[di]));
      const double stat = u.sum() / (n * n);
      const auto t2 = Clock::now();
      const double thr = threshold(wild_bootstrap_stats(u, spec.n_boot, boot_rng), spec.alpha);
      t_stat[j] += score_time + std::chrono::duration<double>(t2 - t1).count();
      t_boot[j] += seconds_since(t2);
      reject[j][di] = stat > thr ? 1 : 0;
    }
  });

  KsdSweepReport report;
  double sigma_mean = 0.0;
  for (double s : sigmas) sigma_mean += s;
  sigma_mean /= static_cast<double>(total);
  double ts = 0.0;
  double tb = 0.0;
  for (std::size_t j = 0; j < total; ++j) {
    ts += t_stat[j];
    tb += t_boot[j];
  }
  for (std::size_t di = 0; di < nd; ++di) {
    std::vector<double> per_replica(spec.n_replica, 0.0);
    for (std::size_t r = 0; r < spec.n_replica; ++r) {
      std::size_t count = 0;
      for (std::size_t k = 0; k < spec.n_run; ++k) count += static_cast<std::size_t>(reject[r * spec.n_run + k][di]);
      per_replica[r] = static_cast<double>(count) / static_cast<double>(spec.n_run);
    }
    KsdSweepRow row;
    row.delta = spec.deltas[di];
    std::tie(row.power_mean, row.power_std) = mean_std(per_replica);
    row.sigma = sigma_mean;
    row.gamma = 1.0 / (2.0 * row.delta * sigma_mean * sigma_mean);
    row.statistic_seconds = ts / static_cast<double>(total * nd);
    row.bootstrap_seconds = tb / static_cast<double>(total * nd);
    if (row.power_mean > (report.rows.empty() ? -1.0 : report.rows[report.best].power_mean)) {
      report.best = report.rows.size();
    }
    report.rows.push_back(row);
  }
  return report;
}

void write_sweep_csv(const KsdSweepReport& report, std::ostream& out) {
  CsvWriter csv(out, {"delta", "power_mean", "power_std", "sigma", "gamma"});
  for (const auto& r : report.rows) csv.row(r.delta, r.power_mean, r.power_std, r.sigma, r.gamma);
}

}  // namespace nsc
