#pragma once

#include <cmath>
#include <functional>
#include <memory>

#include "nsc/critic.hpp"
#include "nsc/distributions.hpp"

namespace nsc::testing {

inline Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (auto& x : v) x = scale * standard_normal(rng);
  return v;
}

inline SampleMatrix random_samples(Eigen::Index n, int d, Rng& rng, double scale = 1.0) {
  SampleMatrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
  return m;
}

/// Central difference of a scalar function along coordinate i.
inline double central_diff(const std::function<double(const Vector&)>& f, Vector x, Eigen::Index i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

/// Central-difference gradient.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = central_diff(f, x, i, h);
  return g;
}

/// max_i |a_i − b_i| / max(|b_i|, floor)
inline double max_rel_err(const Vector& a, const Vector& b, double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  }
  return worst;
}

/// ½N(0, I) + ½N(0.5·1, I) written out independently of make_benchmark_mixture.
inline std::shared_ptr<GaussianMixture> benchmark_q(int d) {
  return std::make_shared<GaussianMixture>(std::vector<double>{0.5, 0.5},
                                           std::vector<Vector>{Vector::Zero(d), Vector::Constant(d, 0.5)},
                                           std::vector<Matrix>{Matrix::Identity(d, d), Matrix::Identity(d, d)});
}

inline std::shared_ptr<GaussianMixture> standard_normal_field(int d) {
  return std::make_shared<GaussianMixture>(std::vector<double>{1.0}, std::vector<Vector>{Vector::Zero(d)},
                                           std::vector<Matrix>{Matrix::Identity(d, d)});
}

}  // namespace nsc::testing
