#include <gtest/gtest.h>

#include <sstream>

#include "nsc/ntk.hpp"
#include "test_util.hpp"

using namespace nsc;

namespace {

MlpCritic centered_critic(int d, int h, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  MlpCritic c = MlpCritic::init(d, h, rng);
  c.enable_centering();
  return c;
}

SampleMatrix benchmark_points(Eigen::Index n, std::uint64_t seed) {
  const GaussianMixture p(make_benchmark_mixture(2, 0.5, 0.8).p);
  Rng rng = make_rng(seed, 1);
  return p.sample(static_cast<std::size_t>(n), rng);
}

Vector benchmark_fstar(const SampleMatrix& x) {
  const MixturePair pair = make_benchmark_mixture(2, 0.5, 0.8);
  const OptimalCritic f(std::make_shared<GaussianMixture>(pair.p), std::make_shared<GaussianMixture>(pair.q));
  return stack(f.batch(x));
}

}  // namespace

TEST(Stack, LayoutAndNorm) {
  SampleMatrix v(2, 2);
  v << 1.0, 2.0, 3.0, 4.0;
  EXPECT_EQ(stack(v), Eigen::Vector4d(1.0, 2.0, 3.0, 4.0));
  EXPECT_DOUBLE_EQ(empirical_norm(stack(v), 2), std::sqrt(15.0));
}

TEST(Eig, IdentityAndOrdering) {
  const EigSystem e = eig_sym_psd(Matrix::Identity(4, 4), 2);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(e.values[k], 0.5, 1e-15);
  const Matrix diag = Eigen::Vector3d(1.0, 3.0, 0.0).asDiagonal();
  const EigSystem f = eig_sym_psd(diag, 1);
  EXPECT_NEAR(f.values[0], 3.0, 1e-15);
  EXPECT_NEAR(f.values[1], 1.0, 1e-15);
  EXPECT_EQ(f.values[2], 0.0);
  EXPECT_NEAR((f.vectors.transpose() * f.vectors - Matrix::Identity(3, 3)).norm(), 0.0, 1e-14);
}

TEST(Eig, Guards) {
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  EXPECT_THROW(eig_sym_psd(asym, 1), std::invalid_argument);
  const Matrix indefinite = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  EXPECT_THROW(eig_sym_psd(indefinite, 1), std::domain_error);
  // Tiny negative rounding is clamped.
  const Matrix nearly = Eigen::Vector2d(1.0, -1e-12).asDiagonal();
  EXPECT_EQ(eig_sym_psd(nearly, 1).values[1], 0.0);
}

TEST(Gram, SymmetricPsdAndReconstructs) {
  const MlpCritic c = centered_critic(2, 16, 1);
  const SampleMatrix x = benchmark_points(30, 1);
  const NtkGram g = ntk_gram(c, x, "t0");
  EXPECT_EQ(g.g.rows(), 60);
  EXPECT_EQ(g.snapshot, "t0");
  EXPECT_EQ((g.g - g.g.transpose()).norm(), 0.0);
  const EigSystem e = eig_sym_psd(g.g, 30);
  EXPECT_GE(e.values.minCoeff(), 0.0);
  const Matrix rebuilt = 30.0 * e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  EXPECT_LT((rebuilt - g.g).norm() / g.g.norm(), 1e-12);
}

TEST(Gram, BlocksMatchFiniteDifferenceJacobians) {
  const MlpCritic c = centered_critic(2, 6, 2);
  const SampleMatrix x = benchmark_points(4, 2);
  const NtkGram g = ntk_gram(c, x);
  const ParamVector theta = c.params();
  const double eps = 1e-6;
  std::vector<Matrix> jac;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector xi = x.row(i).transpose();
    Matrix j(2, theta.size());
    for (Eigen::Index m = 0; m < theta.size(); ++m) {
      ParamVector up = theta;
      ParamVector down = theta;
      up[m] += eps;
      down[m] -= eps;
      MlpCritic cu = c;
      MlpCritic cd = c;
      cu.set_params(up);
      cd.set_params(down);
      j.col(m) = (cu.forward(xi) - cd.forward(xi)) / (2.0 * eps);
    }
    jac.push_back(j);
  }
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index k = 0; k < 4; ++k) {
      const Matrix fd = jac[i] * jac[k].transpose();
      const Matrix block = g.g.block(i * 2, k * 2, 2, 2);
      EXPECT_LT((block - fd).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Gram, RankBoundedByParameterCount) {
  // A width-1 net has fewer parameters than the 80 stacked outputs.
  const MlpCritic c = centered_critic(2, 1, 3);
  const SampleMatrix x = benchmark_points(40, 3);
  const EigSystem e = eig_sym_psd(ntk_gram(c, x).g, 40);
  const auto m = static_cast<Eigen::Index>(c.param_count());
  ASSERT_LT(m, 80);
  for (Eigen::Index k = m; k < 80; ++k) EXPECT_LT(e.values[k], 1e-10 * e.values[0]);
}

TEST(Gram, SizeCap) {
  const MlpCritic c = centered_critic(2, 2, 4);
  EXPECT_THROW(ntk_gram(c, SampleMatrix::Zero(1001, 2)), std::invalid_argument);
}

TEST(KernelOde, ScalarClosedForm) {
  // One point in 1D: u' = −μ(λu − f*), so u(t) = (f*/λ)(1 − exp(−λμt)).
  const Matrix g = Matrix::Constant(1, 1, 2.0);
  const Vector fs = Vector::Constant(1, 1.0);
  const double lambda = 0.5;
  const Trajectory tr = kernel_ode_euler(g, 1, fs, lambda, 2.0, 1e-5, {1.0});
  ASSERT_EQ(tr.times.size(), 2u);
  EXPECT_DOUBLE_EQ(tr.times[0], 1.0);
  for (std::size_t s = 0; s < 2; ++s) {
    const double exact = (1.0 - std::exp(-lambda * 2.0 * tr.times[s])) / lambda;
    EXPECT_NEAR(tr.values[s][0], exact, 1e-4 * exact);
  }
  EXPECT_EQ(tr.steps, 200000);
}

TEST(KernelOde, StabilityGuard) {
  const Matrix g = Matrix::Constant(1, 1, 2.0);
  EXPECT_THROW(kernel_ode_euler(g, 1, Vector::Ones(1), 1.0, 5.0, 1.0), std::domain_error);
}

TEST(KernelOde, MatchesSpectralSolution) {
  const Eigen::Index n = 100;
  const MlpCritic c = centered_critic(2, 64, 5);
  const SampleMatrix x = benchmark_points(n, 5);
  const Vector fs = benchmark_fstar(x);
  const NtkGram g = ntk_gram(c, x);
  const EigSystem e = eig_sym_psd(g.g, n);
  for (double lambda : {0.5, 4.0}) {
    const double eta = 1e-3 / (lambda * e.values[0]);
    const std::vector<double> ts{0.1 / lambda, 1.0 / lambda, 5.0 / lambda};
    const Trajectory tr = kernel_ode_euler(g.g, n, fs, lambda, ts.back(), eta, ts);
    ASSERT_EQ(tr.times.size(), 3u);
    for (std::size_t s = 0; s < 3; ++s) {
      const Vector exact = spectral_solution(e, fs, lambda, tr.times[s]);
      EXPECT_LT((tr.values[s] - exact).norm() / exact.norm(), 1e-3) << "lambda " << lambda << " t " << tr.times[s];
    }
  }
}

TEST(Spectral, CoefficientsDecay) {
  const Eigen::Index n = 20;
  const MlpCritic c = centered_critic(2, 8, 6);
  const SampleMatrix x = benchmark_points(n, 6);
  const Vector fs = benchmark_fstar(x);
  const EigSystem e = eig_sym_psd(ntk_gram(c, x).g, n);
  const double lambda = 2.0;
  EXPECT_EQ(spectral_solution(e, fs, lambda, 0.0).norm(), 0.0);
  const Vector coeff_f = e.vectors.transpose() * fs;
  double prev = std::numeric_limits<double>::infinity();
  for (double t : {0.0, 0.1, 0.5, 2.0, 10.0}) {
    const Vector resid = lambda * spectral_solution(e, fs, lambda, t) - fs;
    const Vector coeff = e.vectors.transpose() * resid;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) {
      if (e.values[k] <= 1e-6) continue;
      const double expect = -coeff_f[k] * std::exp(-t * lambda * e.values[k]);
      EXPECT_NEAR(coeff[k], expect, 1e-10 * std::max(1.0, std::abs(coeff_f[k])));
    }
    const double err = empirical_norm(resid, n);
    EXPECT_LE(err, prev + 1e-15);
    prev = err;
  }
}

TEST(Spectral, LongTimeLimitIsProjection) {
  const Eigen::Index n = 15;
  const MlpCritic c = centered_critic(2, 8, 7);
  const SampleMatrix x = benchmark_points(n, 7);
  const Vector fs = benchmark_fstar(x);
  const EigSystem e = eig_sym_psd(ntk_gram(c, x).g, n);
  const Vector limit = spectral_solution(e, fs, 1.0, 1e9);
  const Vector coeff = e.vectors.transpose() * limit;
  const Vector coeff_f = e.vectors.transpose() * fs;
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    if (e.values[k] > 1e-6) {
      EXPECT_NEAR(coeff[k], coeff_f[k], 1e-10 * fs.norm());
    } else if (e.values[k] == 0.0) {
      EXPECT_EQ(coeff[k], 0.0);
    }
  }
}

TEST(Gd, ZeroTargetStaysZero) {
  const MlpCritic c = centered_critic(2, 16, 8);
  const SampleMatrix x = benchmark_points(25, 8);
  const Trajectory tr = gd_trajectory(c, x, Vector::Zero(50), 2.0, 0.5, 1e-2, {0.25});
  for (const Vector& v : tr.values) EXPECT_EQ(v.norm(), 0.0);
}

TEST(Gd, EmpiricalObjectiveUnderNullStaysSmall) {
  const auto q = nsc::testing::benchmark_q(2);
  Rng rng = make_rng(9, 0);
  const SampleMatrix x = q->sample(200, rng);
  const MlpCritic c = centered_critic(2, 16, 9);
  const double lambda = 4.0;
  const Trajectory tr = gd_trajectory(c, x, Vector::Zero(400), lambda, 1.0 / lambda, 1e-3, {}, GdObjective::kEmpiricalStein,
                                      q.get());
  // Moves only through Monte Carlo noise in the Stein term.
  EXPECT_LT(lambda * empirical_norm(tr.values.back(), 200), 0.1);
  EXPECT_THROW(gd_trajectory(c, x, Vector::Zero(400), lambda, 0.1, 1e-3, {}, GdObjective::kEmpiricalStein),
               std::invalid_argument);
}

TEST(Gd, FirstStepFollowsKernel) {
  // One small step of GD moves u by η(G/n)f* to first order.
  const Eigen::Index n = 20;
  const MlpCritic c = centered_critic(2, 16, 10);
  const SampleMatrix x = benchmark_points(n, 10);
  const Vector fs = benchmark_fstar(x);
  const NtkGram g = ntk_gram(c, x);
  const double eta = 1e-4;
  const Trajectory gd = gd_trajectory(c, x, fs, 50.0, eta, eta);
  const Trajectory ode = kernel_ode_euler(g.g, n, fs, 50.0, eta, eta);
  ASSERT_EQ(gd.steps, 1);
  EXPECT_LT((gd.values.back() - ode.values.back()).norm() / ode.values.back().norm(), 1e-3);
}

TEST(Gd, Deterministic) {
  const MlpCritic c = centered_critic(2, 16, 11);
  const SampleMatrix x = benchmark_points(20, 11);
  const Vector fs = benchmark_fstar(x);
  const Trajectory a = gd_trajectory(c, x, fs, 1.0, 0.2, 1e-2, {0.1});
  const Trajectory b = gd_trajectory(c, x, fs, 1.0, 0.2, 1e-2, {0.1});
  ASSERT_EQ(a.values.size(), b.values.size());
  for (std::size_t s = 0; s < a.values.size(); ++s) EXPECT_EQ(a.values[s], b.values[s]);
}

TEST(Lazy, SmallSpecReportAndCsv) {
  LazySpec spec;
  spec.width = 16;
  spec.n = 30;
  spec.lambdas = {1.0, 8.0};
  spec.seeds = {0, 1, 2};
  spec.eta_factor = 1e-2;
  const auto reports = lazy_deviation(spec);
  ASSERT_EQ(reports.size(), 6u);
  EXPECT_EQ(reports[0].lambda, 1.0);
  EXPECT_EQ(reports[3].lambda, 8.0);
  EXPECT_EQ(reports[4].seed, 1u);
  for (const auto& r : reports) {
    ASSERT_EQ(r.times.size(), 4u);
    EXPECT_NEAR(r.times.back(), 1.0 / r.lambda, 1e-12);
    EXPECT_GT(r.mu_max, 0.0);
    // η is the realized step, shrunk so that t is hit exactly.
    EXPECT_LE(r.eta * r.lambda * r.mu_max, 1e-2 * (1.0 + 1e-12));
    EXPECT_GT(r.eta * r.lambda * r.mu_max, 0.95e-2);
  }
  const auto med = median_final_deviation(spec, reports);
  ASSERT_EQ(med.size(), 2u);
  EXPECT_GT(med[0], med[1]);

  std::ostringstream a;
  std::ostringstream b;
  write_lazy_csv(reports, a);
  write_lazy_csv(lazy_deviation(spec), b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("lambda,t,dev_rel,ubar_err,seed,width,n\n1,", 0), 0u);
}

TEST(Lazy, Validation) {
  LazySpec spec;
  spec.lambdas = {};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = LazySpec{};
  spec.eta_factor = 2.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = LazySpec{};
  spec.fractions = {0.0};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}
