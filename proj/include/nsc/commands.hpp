#pragma once

#include <filesystem>
#include <string>

#include "nsc/config.hpp"

namespace nsc {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;     // bad config, IO failure
inline constexpr int kExitDiverged = 2;  // training produced non-finite values

/// Each command writes into config.out (created if missing) and returns an
/// exit code. Outputs other than timing columns are a pure function of the
/// config.
///
///   train        curves.csv, model_best.ckpt, model_final.ckpt, result.json
///   gof          gof.json, null_stats.csv, witness.csv (+ train outputs)
///   power        power.csv, result.json
///   ksd          ksd.csv (with timing), sweep.csv, result.json
///   ntk          lazy.csv, result.json
///   sweep-split  split_power.csv, result.json
int cmd_train(const ExperimentConfig& config);
int cmd_gof(const ExperimentConfig& config);
int cmd_power(const ExperimentConfig& config);
int cmd_ksd(const ExperimentConfig& config);
int cmd_ntk(const ExperimentConfig& config);
int cmd_sweep_split(const ExperimentConfig& config);

/// Dispatches on verb; throws std::invalid_argument for unknown verbs.
int run_command(const std::string& verb, const ExperimentConfig& config);

/// Writes {"error": message} to <out>/error.json when possible.
void write_error(const std::filesystem::path& out, const std::string& message);

}  // namespace nsc
