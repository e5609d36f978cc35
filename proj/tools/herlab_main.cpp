#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "herlab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-goal RL laboratory: sparse-reward 2D tasks with "
               "hindsight relabeling variants"};
  app.require_subcommand(1);

  std::string env = "hand_reach";
  std::string algo = "her";
  std::uint64_t seed = 0;
  int epochs = 50;
  std::string out_dir = "runs";
  std::string config_file;
  CLI::App* train = app.add_subcommand("train", "Run one training experiment");
  train->add_option("--env", env, "Environment id (e.g. hand_reach, hand_v1)");
  train->add_option("--algo", algo,
                    "her, her+ibs, filtered, filtered+ibs, cher, cher+ibs, "
                    "unfiltered-cher, unfiltered-cher+ibs");
  train->add_option("--seed", seed, "Root RNG seed");
  train->add_option("--epochs", epochs, "Training epochs");
  train->add_option("--out", out_dir, "Output directory for metrics files");
  train->add_option("--config", config_file, "key=value config file");

  std::string glob_pattern;
  std::string agg_out = "aggregate.csv";
  CLI::App* aggregate =
      app.add_subcommand("aggregate", "Per-epoch median/p33/p67 across runs");
  aggregate->add_option("--glob", glob_pattern, "Metrics file pattern")
      ->required();
  aggregate->add_option("--out", agg_out, "Output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      herlab::ExperimentConfig cfg;
      if (!config_file.empty()) herlab::load_config_file(cfg, config_file);
      herlab::apply_env_overrides(cfg);
      // Explicit flags take precedence over file and environment values.
      if (train->count("--env")) cfg.env_id = herlab::env_id_from_string(env);
      if (train->count("--algo")) cfg.algo = herlab::algo_from_string(algo);
      if (train->count("--seed")) cfg.seed = seed;
      if (train->count("--epochs")) cfg.epochs = epochs;
      const auto path = herlab::run_experiment(cfg, out_dir);
      std::printf("%s\n", path.c_str());
    } else {
      const auto files = herlab::expand_glob(glob_pattern);
      herlab::aggregate_metrics(files, agg_out);
      std::printf("%s\n", agg_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
