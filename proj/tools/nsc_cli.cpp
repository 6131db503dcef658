// Command-line runner: nsc <verb> --config PATH [--out DIR] [--seed N] [--threads N]

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nsc/commands.hpp"
#include "nsc/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Neural Stein critic experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;

  const char* verbs[][2] = {
      {"train", "train a critic and log curves and checkpoints"},
      {"gof", "run one goodness-of-fit test"},
      {"power", "estimate test power over replicas"},
      {"ksd", "KSD baseline and bandwidth sweep"},
      {"ntk", "lazy-training deviation study"},
      {"sweep-split", "power across train/test split fractions"},
  };
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v[0], v[1]);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "run seed (overrides config)");
    sub->add_option("--threads", threads, "worker cap, 0 = all cores");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string verb = app.get_subcommands().front()->get_name();
  std::string out_for_errors = out_dir.value_or(".");
  try {
    nsc::set_max_threads(threads);
    nlohmann::json j;
    {
      std::ifstream in(config_path);
      j = nlohmann::json::parse(in);
    }
    if (seed) j["seed"] = *seed;
    if (out_dir) j["out"] = *out_dir;
    if (j.is_object() && j.contains("out") && j["out"].is_string()) out_for_errors = j["out"].get<std::string>();
    const nsc::ExperimentConfig config = nsc::parse_config(j);
    out_for_errors = config.out;
    return nsc::run_command(verb, config);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << '\n';
    nsc::write_error(out_for_errors, e.what());
    return nsc::kExitError;
  }
}
