#include <gtest/gtest.h>

#include <json.hpp>

#include "nsc/metrics.hpp"
#include "test_util.hpp"

using namespace nsc;

namespace {

struct Fixture {
  std::shared_ptr<GaussianMixture> p;
  std::shared_ptr<GaussianMixture> q;
  MlpCritic critic{1, 1};
};

Fixture make_setup(std::uint64_t seed) {
  const MixturePair pair = make_benchmark_mixture(2, 0.5, 0.8);
  Fixture s;
  s.p = std::make_shared<GaussianMixture>(pair.p);
  s.q = std::make_shared<GaussianMixture>(pair.q);
  Rng rng = make_rng(seed, 0);
  s.critic = MlpCritic::init(2, 16, rng);
  s.critic.layers().b3 = nsc::testing::random_vector(2, rng, 0.3);
  return s;
}

}  // namespace

TEST(Metrics, ScaledMseZeroWhenMatched) {
  const Fixture s = make_setup(1);
  Rng rng = make_rng(1, 1);
  const SampleMatrix x = s.q->sample(100, rng);
  const double lambda = 0.3;
  const SampleMatrix matched = lambda * s.critic.forward_batch(x);
  EXPECT_NEAR(scaled_mse(s.critic, lambda, x, matched), 0.0, 1e-28);
}

TEST(Metrics, MseOfZeroCriticIsOptimalNorm) {
  const Fixture s = make_setup(2);
  const OptimalCritic fstar(s.p, s.q);
  Rng rng = make_rng(2, 1);
  const SampleMatrix xq = s.q->sample(500, rng);
  const SampleMatrix xp = s.p->sample(500, rng);
  const MlpCritic zero(2, 16);
  EXPECT_NEAR(mse_q_hat(zero, 0.5, fstar, xq), fstar.batch(xq).rowwise().squaredNorm().mean(), 1e-14);
  EXPECT_NEAR(mse_p_hat(zero, 0.5, fstar, xp), fstar.batch(xp).rowwise().squaredNorm().mean(), 1e-14);
  EXPECT_GE(mse_q_hat(s.critic, 0.5, fstar, xq), 0.0);
}

TEST(Metrics, MonitorOfZeroCriticIsZero) {
  const Fixture s = make_setup(3);
  Rng rng = make_rng(3, 1);
  EXPECT_EQ(monitor_mse(MlpCritic(2, 4), 0.7, *s.q, s.p->sample(50, rng)), 0.0);
}

TEST(Metrics, MonitorRelationToMseP) {
  // mse_p − monitor = mean|f*|² + 2λ·mean(T_p f) on the same samples; the
  // last term is a Stein-identity fluctuation with zero mean under p.
  const Fixture s = make_setup(4);
  const OptimalCritic fstar(s.p, s.q);
  Rng rng = make_rng(4, 1);
  const SampleMatrix x = s.p->sample(300, rng);
  for (double lambda : {0.05, 0.5, 2.0}) {
    const double lhs = mse_p_hat(s.critic, lambda, fstar, x) - monitor_mse(s.critic, lambda, *s.q, x);
    const double tp = witness_values(s.critic, *s.p, x, {}).mean();
    const double rhs = fstar.batch(x).rowwise().squaredNorm().mean() + 2.0 * lambda * tp;
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Metrics, WitnessSpreadUsesOneOverN) {
  EXPECT_NEAR(witness_spread(Eigen::Vector2d(1.0, 3.0)), std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_EQ(witness_spread(Eigen::Vector3d(4.0, 4.0, 4.0)), 0.0);
}

TEST(Metrics, PowerProxyWorkedExample) {
  EXPECT_NEAR(power_proxy(Eigen::Vector2d(1.0, 3.0), Eigen::Vector2d(-1.0, 1.0)), 1.4142135623730951, 1e-12);
}

TEST(Metrics, PowerProxyGuards) {
  EXPECT_THROW(power_proxy(Eigen::Vector2d(2.0, 2.0), Eigen::Vector2d(2.0, 2.0)), std::domain_error);
  EXPECT_THROW(power_proxy(Vector::Ones(1), Eigen::Vector2d(1.0, 2.0)), std::invalid_argument);
}

TEST(Metrics, PowerProxyNearZeroUnderNull) {
  const Fixture s = make_setup(5);
  Rng rng = make_rng(5, 1);
  const std::size_t n = 2000;
  const double pp = power_proxy(s.critic, *s.q, s.q->sample(n, rng), s.q->sample(n, rng));
  // Numerator SE is ~sd/√n while the denominator is ~2·sd/√n, so the proxy
  // is roughly N(0, 1/4).
  EXPECT_LT(std::abs(pp), 4.0 * 0.5);
}

TEST(Metrics, MetricJson) {
  const auto j = nlohmann::json::parse(to_json(MetricValue{"mse_q", 0.25, 100, 0.5}));
  EXPECT_EQ(j["name"], "mse_q");
  EXPECT_EQ(j["value"], 0.25);
  EXPECT_EQ(j["n"], 100);
  EXPECT_EQ(j["lambda"], 0.5);
}
