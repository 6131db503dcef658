#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "nsc/critic.hpp"

namespace nsc {

/// Serialized critic state. Text format, one "key value..." line each:
///
///   nsc-checkpoint 1
///   d <int>
///   h <int>
///   activation swish
///   lambda <double>
///   interval <int>
///   monitor <double>
///   seed <uint64>
///   centered <0|1>
///   params <M doubles>
///   reference <M doubles>      (only when centered)
///
/// Doubles are written with 17 significant digits; params follow the
/// ParamVector packing order.
struct Checkpoint {
  int d = 0;
  int h = 0;
  std::string activation = "swish";
  ParamVector params;
  double lambda = 0.0;
  long long interval = 0;
  double monitor = 0.0;
  std::uint64_t seed = 0;
  std::optional<ParamVector> reference;

  static Checkpoint from_critic(const MlpCritic& critic, double lambda, long long interval,
                                double monitor, std::uint64_t seed);
  MlpCritic to_critic() const;
};

void save_checkpoint(const Checkpoint& c, std::ostream& out);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nsc
