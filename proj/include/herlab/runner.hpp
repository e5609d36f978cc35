#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "herlab/curriculum.hpp"
#include "herlab/ddpg.hpp"
#include "herlab/env.hpp"
#include "herlab/her.hpp"
#include "herlab/replay.hpp"

namespace herlab {

enum class Algo {
  kHer,
  kHerIbs,
  kFiltered,
  kFilteredIbs,
  kCher,
  kCherIbs,
  kUnfilteredCher,
  kUnfilteredCherIbs,
};

std::string to_string(Algo a);
Algo algo_from_string(const std::string& s);
bool algo_is_curriculum(Algo a);
bool algo_uses_ibs(Algo a);
bool algo_uses_filter(Algo a);

struct ExperimentConfig {
  EnvId env_id = EnvId::kHandReach;
  Algo algo = Algo::kHer;
  std::uint64_t seed = 0;
  int epochs = 50;
  int cycles_per_epoch = 50;
  int episodes_per_cycle = 16;
  int opt_steps_per_cycle = 40;
  int eval_episodes = 100;
  int batch_size = 64;

  AgentConfig agent;
  int her_k = 4;
  double weight_floor = 0.002;
  double sigma0 = 0.2;
  double sigma_final = 0.05;
  int grid_rows = 20;
  int grid_cols = 20;

  std::size_t replay_capacity = 1'000'000;
  double per_alpha = 0.6;
  double per_epsilon = 0.01;

  CriticTransfer critic_transfer = CriticTransfer::kReset;
  double curriculum_c = 0.9;
  int k_window = 20;

  int max_steps = 50;
  bool export_grids = false;

  void validate() const;  // throws on algo/env mismatch or bad counts
};

struct MetricsRow {
  int epoch = 0;
  double success_rate = 0.0;
  double mean_final_distance = 0.0;
  double estimated_q0 = 0.0;
  long positive_reward_count = 0;  // cumulative
  double kl_distance = 0.0;
  double epsilon = 0.0;
  double sigma = 0.0;
  int layer_index = 0;
};

struct EvalResult {
  double success_rate = 0.0;
  double mean_final_distance = 0.0;
  double estimated_q0 = 0.0;
};

// n greedy episodes on the real task. When spec is given, the agent acts
// through that layer's projection while success is still the env's own.
EvalResult evaluate(Agent& agent, Env& env, int n, RngStream& rng,
                    const SubTaskSpec* spec = nullptr);

void emit_metrics(const std::vector<MetricsRow>& rows,
                  const std::filesystem::path& path);

// Runs the full training loop and returns the metrics CSV path. A companion
// run manifest (resolved config as key=value text) lands next to it.
std::filesystem::path run_experiment(const ExperimentConfig& cfg,
                                     const std::filesystem::path& out_dir);

// Per-epoch median / 33rd / 67th percentile across several metrics files.
void aggregate_metrics(const std::vector<std::filesystem::path>& inputs,
                       const std::filesystem::path& out);

// '*'-wildcard expansion in the final path component.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

// Key=value text; '#' starts a comment. Unknown keys are an error.
void apply_config_line(ExperimentConfig& cfg, const std::string& key,
                       const std::string& value);
void load_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);
// Environment overrides: HERLAB_<UPPERCASED KEY>=value.
void apply_env_overrides(ExperimentConfig& cfg);

std::string metrics_basename(const ExperimentConfig& cfg);

}  // namespace herlab
