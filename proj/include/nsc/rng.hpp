#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace nsc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Sample sets are stored one sample per row.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for substream `k` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

double standard_normal(Rng& rng);
double uniform01(Rng& rng);
/// +1 or -1 with probability 1/2 each.
double rademacher(Rng& rng);
/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

}  // namespace nsc
