#include "herlab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace herlab {
namespace {

constexpr const char* kCodeVersion = "herlab 0.1.0";
constexpr double kDeg = M_PI / 180.0;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Goal support of the reach-style sub-task (the object's reset region).
Rect reach_region(const Env& env) {
  switch (env.config().env_id) {
    case EnvId::kHandV1:
    case EnvId::kHandWallV1:
      return {0.02, 0.0, 0.48, 0.04};
    case EnvId::kRobotV1: {
      const auto& m = env.manipulator();
      const double span = m.link_lengths.sum() * std::cos(75.0 * kDeg);
      return {m.base.x() - span, 0.93, m.base.x() + span, 0.98};
    }
    default:
      return env.goal_region();
  }
}

struct RolledEpisode {
  EpisodeTrace trace;
  bool layer_success = false;  // sub-goal reached at any step
};

VectorXd padded_state(const SubTaskSpec* spec, const VectorXd& obs,
                      int state_width) {
  if (spec == nullptr) return obs;
  VectorXd out = VectorXd::Zero(state_width);
  for (std::size_t i = 0; i < spec->obs_idx.size(); ++i) {
    out[spec->obs_idx[i]] = obs[long(i)];
  }
  return out;
}

VectorXd full_vector(const GoalObservation& o) {
  VectorXd f(o.observation.size() + 2);
  f << o.observation, o.desired_goal;
  return f;
}

RolledEpisode roll_episode(Agent& agent, Env& env, const SubTaskSpec* spec,
                           double threshold, RngStream& env_rng,
                           RngStream& explore_rng, bool explore) {
  RolledEpisode out;
  const int state_width = agent.input_dim() - 2;
  GoalObservation o = env.reset(env_rng);
  bool done = false;
  while (!done) {
    GoalObservation layer = spec != nullptr
                                ? state_to_obs(*spec, full_vector(o))
                                : o;
    VectorXd state = padded_state(spec, layer.observation, state_width);
    VectorXd input(agent.input_dim());
    input << state, layer.desired_goal;
    VectorXd a = agent.select_action(input, explore, explore_rng);
    Env::StepResult res = env.step(a);
    GoalObservation next_layer =
        spec != nullptr ? state_to_obs(*spec, full_vector(res.obs)) : res.obs;
    EpisodeStep step;
    step.state = std::move(state);
    step.action = std::move(a);
    step.next_state = padded_state(spec, next_layer.observation, state_width);
    step.achieved_prev = layer.achieved_goal;
    step.achieved_next = next_layer.achieved_goal;
    step.desired = next_layer.desired_goal;
    if (compute_reward(step.achieved_next, step.desired, threshold) == 0.0) {
      out.layer_success = true;
    }
    out.trace.steps.push_back(std::move(step));
    done = res.done;
    o = res.obs;
  }
  return out;
}

}  // namespace

std::string to_string(Algo a) {
  switch (a) {
    case Algo::kHer: return "her";
    case Algo::kHerIbs: return "her+ibs";
    case Algo::kFiltered: return "filtered";
    case Algo::kFilteredIbs: return "filtered+ibs";
    case Algo::kCher: return "cher";
    case Algo::kCherIbs: return "cher+ibs";
    case Algo::kUnfilteredCher: return "unfiltered-cher";
    case Algo::kUnfilteredCherIbs: return "unfiltered-cher+ibs";
  }
  return "?";
}

Algo algo_from_string(const std::string& s) {
  for (Algo a : {Algo::kHer, Algo::kHerIbs, Algo::kFiltered, Algo::kFilteredIbs,
                 Algo::kCher, Algo::kCherIbs, Algo::kUnfilteredCher,
                 Algo::kUnfilteredCherIbs}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown algo: " + s);
}

bool algo_is_curriculum(Algo a) {
  return a == Algo::kCher || a == Algo::kCherIbs ||
         a == Algo::kUnfilteredCher || a == Algo::kUnfilteredCherIbs;
}

bool algo_uses_ibs(Algo a) {
  return a == Algo::kHerIbs || a == Algo::kFilteredIbs || a == Algo::kCherIbs ||
         a == Algo::kUnfilteredCherIbs;
}

bool algo_uses_filter(Algo a) {
  return a == Algo::kFiltered || a == Algo::kFilteredIbs || a == Algo::kCher ||
         a == Algo::kCherIbs;
}

void ExperimentConfig::validate() const {
  if (epochs < 0 || cycles_per_epoch < 1 || episodes_per_cycle < 1 ||
      opt_steps_per_cycle < 1 || eval_episodes < 1 || batch_size < 1 ||
      her_k < 0 || max_steps < 1) {
    throw std::invalid_argument("experiment counts out of range");
  }
  if (algo_is_curriculum(algo) && env_id != EnvId::kHandV1 &&
      env_id != EnvId::kHandWallV1 && env_id != EnvId::kRobotV1) {
    throw std::invalid_argument("curriculum algorithms require a v1 task");
  }
}

EvalResult evaluate(Agent& agent, Env& env, int n, RngStream& rng,
                    const SubTaskSpec* spec) {
  if (n < 1) throw std::invalid_argument("eval episode count must be >= 1");
  EvalResult out;
  const int state_width = agent.input_dim() - 2;
  for (int e = 0; e < n; ++e) {
    GoalObservation o = env.reset(rng);
    {
      GoalObservation layer =
          spec != nullptr ? state_to_obs(*spec, full_vector(o)) : o;
      VectorXd input(agent.input_dim());
      input << padded_state(spec, layer.observation, state_width),
          layer.desired_goal;
      out.estimated_q0 += agent.value_of(input);
    }
    bool success = false;
    bool done = false;
    while (!done) {
      GoalObservation layer =
          spec != nullptr ? state_to_obs(*spec, full_vector(o)) : o;
      VectorXd input(agent.input_dim());
      input << padded_state(spec, layer.observation, state_width),
          layer.desired_goal;
      VectorXd a = agent.select_action(input, /*explore=*/false, rng);
      Env::StepResult res = env.step(a);
      success = res.success;
      done = res.done;
      o = res.obs;
    }
    out.success_rate += success ? 1.0 : 0.0;
    out.mean_final_distance += (o.achieved_goal - env.goal()).norm();
  }
  out.success_rate /= n;
  out.mean_final_distance /= n;
  out.estimated_q0 /= n;
  return out;
}

void emit_metrics(const std::vector<MetricsRow>& rows,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,success_rate,mean_final_distance,estimated_q0,"
         "positive_reward_count,kl_distance,epsilon,sigma,layer_index\n";
  for (const MetricsRow& r : rows) {
    out << r.epoch << ',' << fmt(r.success_rate) << ','
        << fmt(r.mean_final_distance) << ',' << fmt(r.estimated_q0) << ','
        << r.positive_reward_count << ',' << fmt(r.kl_distance) << ','
        << fmt(r.epsilon) << ',' << fmt(r.sigma) << ',' << r.layer_index
        << '\n';
  }
}

std::string metrics_basename(const ExperimentConfig& cfg) {
  return "metrics_" + to_string(cfg.env_id) + "_" + to_string(cfg.algo) +
         "_seed" + std::to_string(cfg.seed);
}

std::filesystem::path run_experiment(const ExperimentConfig& cfg,
                                     const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  RngStream root(cfg.seed);
  RngStream env_rng = root.fork("env");
  RngStream init_rng = root.fork("init");
  RngStream explore_rng = root.fork("explore");
  RngStream relabel_rng = root.fork("relabel");
  RngStream sampler_rng = root.fork("sampler");
  RngStream eval_rng = root.fork("eval");
  RngStream curriculum_rng = root.fork("curriculum");

  EnvConfig ec;
  ec.env_id = cfg.env_id;
  ec.max_steps = cfg.max_steps;
  Env env(ec);
  Env eval_env(ec);

  const bool with_curriculum = algo_is_curriculum(cfg.algo);
  CurriculumState cstate;
  if (with_curriculum) {
    cstate.layers = get_curriculum(cfg.env_id);
    cstate.c = cfg.curriculum_c;
    cstate.k_window = cfg.k_window;
  }
  const int input_dim = with_curriculum
                            ? cstate.layers.back().final_width
                            : env.observation_dim() + 2;

  Agent agent(input_dim, env.action_low(), env.action_high(), cfg.agent,
              init_rng);
  if (with_curriculum) zero_hidden_columns(agent, cstate.current());
  ReplayBuffer buffer(cfg.replay_capacity, cfg.per_alpha, cfg.per_epsilon);
  HerConfig hc{cfg.her_k, algo_uses_ibs(cfg.algo) ? HerStrategy::kIbs
                                                  : HerStrategy::kFuture,
               algo_uses_filter(cfg.algo), cfg.weight_floor};

  auto active_spec = [&]() -> const SubTaskSpec* {
    return with_curriculum ? &cstate.current() : nullptr;
  };
  auto active_threshold = [&]() {
    return with_curriculum ? cstate.current().reward_threshold
                           : env.threshold();
  };
  auto make_grid = [&]() {
    const bool reach_layer = with_curriculum && !cstate.at_final();
    return VirtualGoalGrid(reach_layer ? reach_region(env) : env.goal_region(),
                           cfg.sigma0, cfg.sigma_final, cfg.grid_rows,
                           cfg.grid_cols);
  };
  VirtualGoalGrid grid = make_grid();

  long positives = 0;
  std::vector<MetricsRow> rows;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int cycle = 0; cycle < cfg.cycles_per_epoch; ++cycle) {
      for (int ep = 0; ep < cfg.episodes_per_cycle; ++ep) {
        const SubTaskSpec* spec = active_spec();
        const double threshold = active_threshold();
        RolledEpisode rolled = roll_episode(agent, env, spec, threshold,
                                            env_rng, explore_rng, true);
        std::vector<Transition> batch = relabel_episode(
            rolled.trace, hc, &grid, threshold, relabel_rng);
        for (Transition& t : batch) {
          // collection pace of useful experience: environment rewards only,
          // relabeled transitions are excluded
          if (t.reward == 0.0 && !t.is_virtual) ++positives;
          buffer.add(std::move(t));
        }
        if (with_curriculum) {
          cstate.history.push_back(rolled.layer_success ? 1.0 : 0.0);
          if (!cstate.at_final() &&
              learned_task(cstate.history, cstate.c, cstate.k_window)) {
            advance_layer(agent, buffer, cstate, cfg.critic_transfer,
                          curriculum_rng);
            grid = make_grid();
          }
        }
      }
      if (buffer.size() >= std::size_t(cfg.batch_size)) {
        for (int opt = 0; opt < cfg.opt_steps_per_cycle; ++opt) {
          ReplayBuffer::Sample s = buffer.sample(cfg.batch_size, sampler_rng);
          Agent::TrainResult tr = agent.train_step(s.items);
          std::vector<double> td(tr.td_errors.data(),
                                 tr.td_errors.data() + tr.td_errors.size());
          buffer.update_priorities(s.ids, td);
        }
      }
    }
    EvalResult ev =
        evaluate(agent, eval_env, cfg.eval_episodes, eval_rng, active_spec());
    MetricsRow row;
    row.epoch = epoch;
    row.success_rate = ev.success_rate;
    row.mean_final_distance = ev.mean_final_distance;
    row.estimated_q0 = ev.estimated_q0;
    row.positive_reward_count = positives;
    row.kl_distance = kl_distance(grid.q(), grid.q_star());
    row.epsilon = agent.epsilon();
    row.sigma = grid.sigma();
    row.layer_index = with_curriculum ? cstate.layer : 0;
    rows.push_back(row);
    if (cfg.export_grids) {
      grid.write_csv(out_dir / (metrics_basename(cfg) + "_q_epoch" +
                                std::to_string(epoch) + ".csv"),
                     out_dir / (metrics_basename(cfg) + "_qstar_epoch" +
                                std::to_string(epoch) + ".csv"));
    }
    agent.epsilon_decay();
    grid.decay_sigma();
  }

  const std::filesystem::path csv = out_dir / (metrics_basename(cfg) + ".csv");
  emit_metrics(rows, csv);

  std::ofstream manifest(out_dir / (metrics_basename(cfg) + "_manifest.txt"));
  manifest << "code_version " << kCodeVersion << "\n"
           << "env " << to_string(cfg.env_id) << "\n"
           << "algo " << to_string(cfg.algo) << "\n"
           << "seed " << cfg.seed << "\n"
           << "epochs " << cfg.epochs << "\n"
           << "cycles_per_epoch " << cfg.cycles_per_epoch << "\n"
           << "episodes_per_cycle " << cfg.episodes_per_cycle << "\n"
           << "opt_steps_per_cycle " << cfg.opt_steps_per_cycle << "\n"
           << "eval_episodes " << cfg.eval_episodes << "\n"
           << "batch_size " << cfg.batch_size << "\n"
           << "gamma " << fmt(cfg.agent.gamma) << "\n"
           << "tau " << fmt(cfg.agent.tau) << "\n"
           << "actor_lr " << fmt(cfg.agent.actor_lr) << "\n"
           << "critic_lr " << fmt(cfg.agent.critic_lr) << "\n"
           << "grad_clip " << fmt(cfg.agent.grad_clip) << "\n"
           << "epsilon " << fmt(cfg.agent.epsilon) << "\n"
           << "epsilon_final " << fmt(cfg.agent.epsilon_final) << "\n"
           << "epsilon_decay_rate " << fmt(cfg.agent.epsilon_decay_rate) << "\n"
           << "noise_scale " << fmt(cfg.agent.noise_scale) << "\n"
           << "batch_norm " << (cfg.agent.batch_norm ? 1 : 0) << "\n"
           << "her_k " << cfg.her_k << "\n"
           << "weight_floor " << fmt(cfg.weight_floor) << "\n"
           << "sigma0 " << fmt(cfg.sigma0) << "\n"
           << "sigma_final " << fmt(cfg.sigma_final) << "\n"
           << "grid_rows " << cfg.grid_rows << "\n"
           << "grid_cols " << cfg.grid_cols << "\n"
           << "replay_capacity " << cfg.replay_capacity << "\n"
           << "per_alpha " << fmt(cfg.per_alpha) << "\n"
           << "per_epsilon " << fmt(cfg.per_epsilon) << "\n"
           << "critic_transfer "
           << (cfg.critic_transfer == CriticTransfer::kReset
                   ? "reset"
                   : cfg.critic_transfer == CriticTransfer::kDecreased
                         ? "decreased"
                         : "regular")
           << "\n"
           << "curriculum_c " << fmt(cfg.curriculum_c) << "\n"
           << "k_window " << cfg.k_window << "\n"
           << "max_steps " << cfg.max_steps << "\n"
           << "export_grids " << (cfg.export_grids ? 1 : 0) << "\n";
  return csv;
}

void aggregate_metrics(const std::vector<std::filesystem::path>& inputs,
                       const std::filesystem::path& out) {
  if (inputs.empty()) throw std::invalid_argument("no metrics files to aggregate");
  std::vector<std::string> columns;
  // epoch -> column -> values across runs
  std::map<int, std::vector<std::vector<double>>> by_epoch;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string header;
    std::getline(in, header);
    if (columns.empty()) {
      std::stringstream hs(header);
      std::string name;
      while (std::getline(hs, name, ',')) columns.push_back(name);
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ls(line);
      std::string field;
      std::vector<double> vals;
      while (std::getline(ls, field, ',')) vals.push_back(std::stod(field));
      if (vals.size() != columns.size()) {
        throw std::runtime_error("ragged metrics row in " + path.string());
      }
      const int epoch = int(vals[0]);
      auto& cols = by_epoch[epoch];
      cols.resize(columns.size() - 1);
      for (std::size_t c = 1; c < vals.size(); ++c) {
        cols[c - 1].push_back(vals[c]);
      }
    }
  }
  auto percentile = [](std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = p * double(v.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  os << "epoch";
  for (std::size_t c = 1; c < columns.size(); ++c) {
    os << ',' << columns[c] << "_median," << columns[c] << "_p33,"
       << columns[c] << "_p67";
  }
  os << '\n';
  for (const auto& [epoch, cols] : by_epoch) {
    os << epoch;
    for (const auto& vals : cols) {
      os << ',' << fmt(percentile(vals, 0.5)) << ','
         << fmt(percentile(vals, 0.33)) << ',' << fmt(percentile(vals, 0.67));
    }
    os << '\n';
  }
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  namespace fs = std::filesystem;
  const auto slash = pattern.find_last_of('/');
  const std::string dir = slash == std::string::npos
                              ? std::string(".")
                              : pattern.substr(0, slash);
  const std::string name =
      slash == std::string::npos ? pattern : pattern.substr(slash + 1);
  auto matches = [](const std::string& pat, const std::string& s) {
    // iterative wildcard match supporting '*' and '?'
    std::size_t p = 0, i = 0, star = std::string::npos, mark = 0;
    while (i < s.size()) {
      if (p < pat.size() && (pat[p] == '?' || pat[p] == s[i])) {
        ++p, ++i;
      } else if (p < pat.size() && pat[p] == '*') {
        star = p++;
        mark = i;
      } else if (star != std::string::npos) {
        p = star + 1;
        i = ++mark;
      } else {
        return false;
      }
    }
    while (p < pat.size() && pat[p] == '*') ++p;
    return p == pat.size();
  };
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() &&
        matches(name, entry.path().filename().string())) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void apply_config_line(ExperimentConfig& cfg, const std::string& key,
                       const std::string& value) {
  auto as_int = [&] { return std::stoi(value); };
  auto as_double = [&] { return std::stod(value); };
  auto as_bool = [&] { return value == "1" || value == "true"; };
  if (key == "env") cfg.env_id = env_id_from_string(value);
  else if (key == "algo") cfg.algo = algo_from_string(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "epochs") cfg.epochs = as_int();
  else if (key == "cycles_per_epoch") cfg.cycles_per_epoch = as_int();
  else if (key == "episodes_per_cycle") cfg.episodes_per_cycle = as_int();
  else if (key == "opt_steps_per_cycle") cfg.opt_steps_per_cycle = as_int();
  else if (key == "eval_episodes") cfg.eval_episodes = as_int();
  else if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "gamma") cfg.agent.gamma = as_double();
  else if (key == "tau") cfg.agent.tau = as_double();
  else if (key == "actor_lr") cfg.agent.actor_lr = as_double();
  else if (key == "critic_lr") cfg.agent.critic_lr = as_double();
  else if (key == "grad_clip") cfg.agent.grad_clip = as_double();
  else if (key == "epsilon") cfg.agent.epsilon = as_double();
  else if (key == "epsilon_final") cfg.agent.epsilon_final = as_double();
  else if (key == "epsilon_decay_rate") cfg.agent.epsilon_decay_rate = as_double();
  else if (key == "noise_scale") cfg.agent.noise_scale = as_double();
  else if (key == "batch_norm") cfg.agent.batch_norm = as_bool();
  else if (key == "her_k") cfg.her_k = as_int();
  else if (key == "weight_floor") cfg.weight_floor = as_double();
  else if (key == "sigma0") cfg.sigma0 = as_double();
  else if (key == "sigma_final") cfg.sigma_final = as_double();
  else if (key == "grid_rows") cfg.grid_rows = as_int();
  else if (key == "grid_cols") cfg.grid_cols = as_int();
  else if (key == "replay_capacity") cfg.replay_capacity = std::stoull(value);
  else if (key == "per_alpha") cfg.per_alpha = as_double();
  else if (key == "per_epsilon") cfg.per_epsilon = as_double();
  else if (key == "critic_transfer") {
    if (value == "reset") cfg.critic_transfer = CriticTransfer::kReset;
    else if (value == "decreased") cfg.critic_transfer = CriticTransfer::kDecreased;
    else if (value == "regular") cfg.critic_transfer = CriticTransfer::kRegular;
    else throw std::invalid_argument("unknown critic_transfer: " + value);
  }
  else if (key == "curriculum_c") cfg.curriculum_c = as_double();
  else if (key == "k_window") cfg.k_window = as_int();
  else if (key == "max_steps") cfg.max_steps = as_int();
  else if (key == "export_grids") cfg.export_grids = as_bool();
  else throw std::invalid_argument("unknown config key: " + key);
}

namespace {
const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "env",          "algo",          "seed",
      "epochs",       "cycles_per_epoch", "episodes_per_cycle",
      "opt_steps_per_cycle", "eval_episodes", "batch_size",
      "gamma",        "tau",           "actor_lr",
      "critic_lr",    "grad_clip",     "epsilon",
      "epsilon_final", "epsilon_decay_rate", "noise_scale",
      "batch_norm",   "her_k",         "weight_floor",
      "sigma0",       "sigma_final",   "grid_rows",
      "grid_cols",    "replay_capacity", "per_alpha",
      "per_epsilon",  "critic_transfer", "curriculum_c",
      "k_window",     "max_steps",     "export_grids"};
  return keys;
}
}  // namespace

void load_config_file(ExperimentConfig& cfg,
                      const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_env_overrides(ExperimentConfig& cfg) {
  for (const std::string& key : config_keys()) {
    std::string var = "HERLAB_";
    for (char c : key) var += char(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(var.c_str())) {
      apply_config_line(cfg, key, v);
    }
  }
}

}  // namespace herlab
