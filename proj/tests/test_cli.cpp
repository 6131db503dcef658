#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nsc/checkpoint.hpp"
#include "nsc/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kCli = NSC_CLI_PATH;
const fs::path kConfigs = NSC_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nsc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Writes `config` next to `dir`, runs the verb into dir/out and returns the exit code.
int run(const std::string& verb, const json& config, const fs::path& dir, const std::string& extra = "") {
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << config.dump(2);
  const std::string cmd = kCli.string() + " " + verb + " --config " + cfg.string() + " --out " +
                          (dir / "out").string() + " --threads 2 " + extra + " > " + (dir / "log.txt").string() +
                          " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

json one_d_config() {
  return json::parse(R"({
    "seed": 3,
    "distribution": {
      "kind": "gaussian_mixture",
      "p": {"weights": [0.5, 0.5], "means": [[-0.8], [1.0]], "covariances": [[[1.0]], [[0.25]]]},
      "q": {"weights": [0.5, 0.5], "means": [[-1.0], [1.0]], "covariances": [[[1.0]], [[1.0]]]}
    },
    "net": {"width": 32},
    "train": {"batch": 50, "epochs": 3, "batches_per_interval": 3, "n_train": 400, "n_val": 100, "n_oracle": 500},
    "schedule": {"kind": "staged", "lambda_init": 1.0, "lambda_term": 0.001, "beta": 0.9},
    "gof": {"n_gof": 50, "n_boot": 200, "r_pool": 10},
    "power": {"n_run": 20, "n_replica": 2}
  })");
}

}  // namespace

TEST(Cli, ShippedConfigsParse) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(nsc::load_config(entry.path())) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 8u);
}

TEST(Cli, TrainWritesArtifactsDeterministically) {
  const fs::path a = scratch("train_a");
  const fs::path b = scratch("train_b");
  ASSERT_EQ(run("train", one_d_config(), a), 0) << slurp(a / "log.txt");
  ASSERT_EQ(run("train", one_d_config(), b), 0) << slurp(b / "log.txt");
  for (const char* f : {"curves.csv", "model_best.ckpt", "model_final.ckpt", "result.json"}) {
    EXPECT_TRUE(fs::exists(a / "out" / f)) << f;
  }
  EXPECT_EQ(slurp(a / "out" / "curves.csv"), slurp(b / "out" / "curves.csv"));
  EXPECT_EQ(slurp(a / "out" / "model_best.ckpt"), slurp(b / "out" / "model_best.ckpt"));

  // 8 batches per epoch, 24 in total, one row per 3 batches.
  const auto rows = lines(a / "out" / "curves.csv");
  EXPECT_EQ(rows.front(), "interval,epoch,lambda,monitor,mse_q,sd");
  EXPECT_EQ(rows.size(), 1u + 8u);

  const json r = json::parse(slurp(a / "out" / "result.json"));
  EXPECT_EQ(r["diverged"], false);
  EXPECT_EQ(r["batches"], 24);
  EXPECT_TRUE(r["best"]["monitor"].is_number());
  EXPECT_TRUE(r["best"]["mse_q"].is_number());
  EXPECT_EQ(r["config"]["train"]["lr"], 1e-3);  // defaults expanded
  EXPECT_EQ(r["config"]["seed"], 3);
}

TEST(Cli, SeedOverrideChangesRun) {
  const fs::path a = scratch("seed_a");
  const fs::path b = scratch("seed_b");
  ASSERT_EQ(run("train", one_d_config(), a), 0);
  ASSERT_EQ(run("train", one_d_config(), b, "--seed 4"), 0);
  EXPECT_NE(slurp(a / "out" / "curves.csv"), slurp(b / "out" / "curves.csv"));
  EXPECT_EQ(json::parse(slurp(b / "out" / "result.json"))["config"]["seed"], 4);
}

TEST(Cli, GofFromCheckpoint) {
  const fs::path a = scratch("gof_train");
  ASSERT_EQ(run("train", one_d_config(), a), 0);
  json cfg = one_d_config();
  cfg["checkpoint"] = (a / "out" / "model_best.ckpt").string();
  const fs::path g = scratch("gof");
  ASSERT_EQ(run("gof", cfg, g), 0) << slurp(g / "log.txt");
  const json r = json::parse(slurp(g / "out" / "gof.json"));
  EXPECT_TRUE(r["reject"].is_boolean());
  EXPECT_EQ(lines(g / "out" / "null_stats.csv").size(), 201u);
  EXPECT_EQ(lines(g / "out" / "witness.csv").size(), 51u);
  EXPECT_FALSE(fs::exists(g / "out" / "curves.csv"));
}

TEST(Cli, PowerCsv) {
  const fs::path a = scratch("power");
  ASSERT_EQ(run("power", one_d_config(), a), 0) << slurp(a / "log.txt");
  const auto rows = lines(a / "out" / "power.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "replica,power,n_run,n_GoF,alpha,schedule_id");
  EXPECT_EQ(rows[1].rfind("0,", 0), 0u);
  EXPECT_NE(rows[1].find(",20,50,0.05,staged(1,0.001,0.9)"), std::string::npos);
}

TEST(Cli, KsdOutputs) {
  json cfg = one_d_config();
  cfg["ksd"] = {{"deltas", {0.5, 1.0}}, {"n_boot", 100}, {"n_sample", 60}, {"n_run", 10}, {"n_replica", 1}};
  const fs::path a = scratch("ksd_a");
  const fs::path b = scratch("ksd_b");
  ASSERT_EQ(run("ksd", cfg, a), 0) << slurp(a / "log.txt");
  ASSERT_EQ(run("ksd", cfg, b), 0);
  const auto rows = lines(a / "out" / "ksd.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "delta,power_mean,power_std,sigma,gamma,statistic_seconds,bootstrap_seconds");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream row(rows[i]);
    std::vector<double> cells;
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(std::stod(cell));
    ASSERT_EQ(cells.size(), 7u);
    EXPECT_GT(cells[5], 0.0);
    EXPECT_GT(cells[6], 0.0);
  }
  // Timing varies between runs; the power table does not.
  EXPECT_EQ(slurp(a / "out" / "sweep.csv"), slurp(b / "out" / "sweep.csv"));
}

TEST(Cli, NtkSmokeRun) {
  json cfg = json::parse(R"({"seed": 0, "ntk": {"n": 200, "width": 64, "lambdas": [2.0], "seeds": [0]}})");
  const fs::path a = scratch("ntk_a");
  const fs::path b = scratch("ntk_b");
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(run("ntk", cfg, a), 0) << slurp(a / "log.txt");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 60.0);
  ASSERT_EQ(run("ntk", cfg, b), 0);
  EXPECT_EQ(slurp(a / "out" / "lazy.csv"), slurp(b / "out" / "lazy.csv"));
  EXPECT_EQ(lines(a / "out" / "lazy.csv").front(), "lambda,t,dev_rel,ubar_err,seed,width,n");
}

TEST(Cli, SweepSplitEchoesFractions) {
  json cfg = one_d_config();
  cfg["split"] = {{"fractions", {0.3, 0.5, 0.7}}, {"n_sample", 300}};
  cfg["power"] = {{"n_run", 10}, {"n_replica", 1}};
  cfg["train"]["epochs"] = 1;
  const fs::path a = scratch("split");
  ASSERT_EQ(run("sweep-split", cfg, a), 0) << slurp(a / "log.txt");
  const auto rows = lines(a / "out" / "split_power.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "fraction,n_train,n_val,n_gof,batch,power_mean,power_std");
  EXPECT_EQ(rows[1].rfind("0.3,72,18,210,50,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("0.5,120,30,150,50,", 0), 0u);
  EXPECT_EQ(rows[3].rfind("0.7,168,42,90,50,", 0), 0u);
}

TEST(Cli, InvalidConfigsFailWithMachineReadableError) {
  json bad_split = one_d_config();
  bad_split["split"] = {{"fractions", {0.5, 1.0}}};
  const fs::path a = scratch("bad_split");
  EXPECT_EQ(run("sweep-split", bad_split, a), 1);
  const json err = json::parse(slurp(a / "out" / "error.json"));
  EXPECT_NE(err["error"].get<std::string>().find("split.fractions"), std::string::npos);

  json typo = one_d_config();
  typo["schedule"]["lamda_term"] = 0.1;
  const fs::path b = scratch("typo");
  EXPECT_EQ(run("train", typo, b), 1);
  EXPECT_TRUE(fs::exists(b / "out" / "error.json"));

  json zero_runs = one_d_config();
  zero_runs["power"]["n_run"] = 0;
  const fs::path c = scratch("zero_runs");
  EXPECT_EQ(run("power", zero_runs, c), 1);
  EXPECT_FALSE(fs::exists(c / "out" / "power.csv"));
}

TEST(Cli, DivergenceExitCode) {
  json cfg = one_d_config();
  cfg["train"]["optimizer"] = "sgd";
  cfg["train"]["lr"] = 50.0;
  cfg["schedule"] = {{"kind", "fixed"}, {"lambda", 100.0}};
  const fs::path a = scratch("diverge");
  EXPECT_EQ(run("train", cfg, a), 2);
  EXPECT_TRUE(json::parse(slurp(a / "out" / "result.json"))["diverged"].get<bool>());
  EXPECT_TRUE(fs::exists(a / "out" / "error.json"));
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(WEXITSTATUS(std::system((kCli.string() + " > /dev/null 2>&1").c_str())), 0);
  EXPECT_NE(WEXITSTATUS(std::system((kCli.string() + " train --config /nonexistent.json > /dev/null 2>&1").c_str())), 0);
  EXPECT_NE(WEXITSTATUS(std::system((kCli.string() + " bogus --config x > /dev/null 2>&1").c_str())), 0);
}
