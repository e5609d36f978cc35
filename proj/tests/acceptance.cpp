// Acceptance gate: one pass/fail line per criterion, non-zero exit on any
// failure. Heavier training-based checks live at the end.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "herlab/curriculum.hpp"
#include "herlab/ddpg.hpp"
#include "herlab/env.hpp"
#include "herlab/her.hpp"
#include "herlab/replay.hpp"
#include "herlab/runner.hpp"

using namespace herlab;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail) {
  std::printf("criterion %2d [%s]: %s%s%s\n", idx, name,
              ok ? "PASS" : "FAIL", detail.empty() ? "" : " — ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(double v) {
  char b[64];
  std::snprintf(b, sizeof(b), "%.4g", v);
  return b;
}

EpisodeTrace random_episode(Env& env, RngStream& env_rng, RngStream& act_rng,
                            bool* ball_moved = nullptr) {
  EpisodeTrace tr;
  GoalObservation o = env.reset(env_rng);
  const Vector2d ball0 = env.ball().pos;
  bool done = false;
  while (!done) {
    VectorXd a = env.action_sample(act_rng);
    auto res = env.step(a);
    EpisodeStep s;
    s.state = o.observation;
    s.action = a;
    s.next_state = res.obs.observation;
    s.achieved_prev = o.achieved_goal;
    s.achieved_next = res.obs.achieved_goal;
    s.desired = o.desired_goal;
    tr.steps.push_back(std::move(s));
    done = res.done;
    o = res.obs;
  }
  if (ball_moved != nullptr) {
    *ball_moved = (env.ball().pos - ball0).norm() > 1e-12;
  }
  return tr;
}

// ---------------------------------------------------------------- criterion 1
void criterion_filter_exactness() {
  EnvConfig ec;
  ec.env_id = EnvId::kHandV1;
  Env env(ec);
  RngStream env_rng(101), act_rng(102), relabel_rng(103);
  HerConfig on;
  on.filter_on = true;
  HerConfig off;
  off.filter_on = false;
  long checked_on = 0, bad_on = 0;
  long checked_off = 0, bad_off = 0;
  for (int e = 0; e < 1000; ++e) {
    bool moved = false;
    EpisodeTrace tr = random_episode(env, env_rng, act_rng, &moved);
    // achieved goal at the pre-transition state sits in ball slots 5,6
    for (const Transition& t :
         relabel_episode(tr, on, nullptr, env.threshold(), relabel_rng)) {
      if (!t.is_virtual) continue;
      ++checked_on;
      const Vector2d prev{t.state[5], t.state[6]};
      if (compute_reward(prev, t.goal, env.threshold()) != -1.0) ++bad_on;
    }
    if (!moved) {
      for (const Transition& t :
           relabel_episode(tr, off, nullptr, env.threshold(), relabel_rng)) {
        if (!t.is_virtual) continue;
        ++checked_off;
        if (t.reward != 0.0) ++bad_off;
      }
    }
  }
  report(1, "filter exactness",
         bad_on == 0 && bad_off == 0 && checked_on >= 0 && checked_off > 0,
         "filtered virtuals checked " + std::to_string(checked_on) +
             ", misleading leaks " + std::to_string(bad_on) +
             "; frozen-ball virtuals " + std::to_string(checked_off) +
             ", non-zero rewards " + std::to_string(bad_off));
}

// ---------------------------------------------------------------- criterion 2
void criterion_ibs_direction() {
  EnvConfig ec;
  ec.env_id = EnvId::kHandV1;
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Env env(ec);
    RngStream env_rng(seed * 1000 + 1), act_rng(seed * 1000 + 2);
    std::vector<EpisodeTrace> pool;
    for (int e = 0; e < 500; ++e) {
      pool.push_back(random_episode(env, env_rng, act_rng));
    }
    double kl_future = 0.0, kl_ibs = 0.0;
    for (HerStrategy strat : {HerStrategy::kFuture, HerStrategy::kIbs}) {
      VirtualGoalGrid grid(env.goal_region(), 0.2, 0.05, 20, 20);
      HerConfig hc;
      hc.strategy = strat;
      RngStream rng(seed * 1000 + 3);
      for (const auto& tr : pool) {
        relabel_episode(tr, hc, &grid, env.threshold(), rng);
      }
      (strat == HerStrategy::kFuture ? kl_future : kl_ibs) =
          kl_distance(grid.q(), grid.q_star());
    }
    if (kl_ibs < kl_future) ++wins;
    detail += (detail.empty() ? "" : ", ") + fmt(kl_ibs) + "<" + fmt(kl_future);
  }
  report(2, "prioritized virtual goals track the target distribution",
         wins == 5, "seeds won " + std::to_string(wins) + "/5 (" + detail + ")");
}

// ---------------------------------------------------------------- criterion 3
double gradient_check(Mlp net, const MatrixXd& x, const MatrixXd& upstream) {
  Mlp::ForwardCache cache;
  net.forward(x, &cache);
  MlpGrads grads = net.backward(cache, upstream);
  auto loss = [&](const Mlp& n) {
    return (n.forward(x).array() * upstream.array()).sum();
  };
  const double h = 1e-6;
  double worst = 0.0;
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (int r = 0; r < layers[l].w.rows(); ++r) {
      for (int c = 0; c < layers[l].w.cols(); ++c) {
        const double keep = layers[l].w(r, c);
        layers[l].w(r, c) = keep + h;
        const double up = loss(net);
        layers[l].w(r, c) = keep - h;
        const double dn = loss(net);
        layers[l].w(r, c) = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double an = grads.layers[l].w(r, c);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
    }
  }
  return worst;
}

void criterion_numerics() {
  RngStream rng(7);
  Mlp actor({11, 16, 16, 16, 3},
            {Activation::kRelu, Activation::kRelu, Activation::kRelu,
             Activation::kTanh},
            rng);
  Mlp critic({14, 16, 16, 16, 1},
             {Activation::kRelu, Activation::kRelu, Activation::kRelu,
              Activation::kLinear},
             rng);
  MatrixXd xa(11, 4), xc(14, 4), ua(3, 4);
  for (int i = 0; i < xa.size(); ++i) xa.data()[i] = rng.uniform(-1, 1);
  for (int i = 0; i < xc.size(); ++i) xc.data()[i] = rng.uniform(-1, 1);
  for (int i = 0; i < ua.size(); ++i) ua.data()[i] = rng.uniform(-1, 1);
  const double actor_err = gradient_check(actor, xa, ua);
  const double critic_err =
      gradient_check(critic, xc, MatrixXd::Constant(1, 4, 0.5));

  // kernel integral against 400x400 midpoint quadrature
  Rect region{0.55, 0.05, 0.95, 0.45};
  double kernel_err = 0.0;
  for (int i = 0; i < 5; ++i) {
    Vector2d g{rng.uniform(), rng.uniform()};
    const double sigma = 0.2;
    const double exact = kernel_score(g, region, sigma);
    double quad = 0.0;
    const int res = 400;
    const double dx = region.width() / res, dy = region.height() / res;
    for (int a = 0; a < res; ++a) {
      for (int b = 0; b < res; ++b) {
        const Vector2d p{region.x0 + (a + 0.5) * dx,
                         region.y0 + (b + 0.5) * dy};
        quad += std::exp(-(g - p).squaredNorm() / (2 * sigma * sigma)) * dx * dy;
      }
    }
    kernel_err = std::max(kernel_err, std::abs(exact - quad) / exact);
  }

  // kinematic tip velocity against central differences
  double fk_err = 0.0;
  for (int i = 0; i < 10; ++i) {
    VectorXd theta(2), theta_dot(2), links(2);
    theta << rng.uniform(0, 2 * M_PI), rng.uniform(0, 2 * M_PI);
    theta_dot << rng.uniform(-3, 3), rng.uniform(-3, 3);
    links << 0.3, 0.3;
    Vector2d base{0.33, 0.5};
    auto [pos, vel] = forward_kinematics(theta, theta_dot, base, links);
    (void)pos;
    const double h = 1e-6;
    auto [pp, v1] = forward_kinematics(theta + h * theta_dot, theta_dot, base, links);
    auto [pm, v2] = forward_kinematics(theta - h * theta_dot, theta_dot, base, links);
    (void)v1;
    (void)v2;
    const Vector2d fd = (pp - pm) / (2 * h);
    if (vel.norm() > 1e-9) {
      fk_err = std::max(fk_err, (vel - fd).norm() / vel.norm());
    }
  }
  report(3, "numerics",
         actor_err < 1e-4 && critic_err < 1e-4 && kernel_err < 1e-4 &&
             fk_err < 1e-6,
         "grad rel err actor " + fmt(actor_err) + ", critic " +
             fmt(critic_err) + "; kernel " + fmt(kernel_err) +
             "; kinematics " + fmt(fk_err));
}

// ---------------------------------------------------------------- criterion 4
void criterion_zero_expansion() {
  auto layers = get_curriculum(EnvId::kHandV1);
  VectorXd low = VectorXd::Constant(3, -1.0), high = VectorXd::Constant(3, 1.0);
  AgentConfig acfg;
  acfg.hidden = {64, 64, 64};
  RngStream init(21);
  Agent agent(layers[0].final_width, low, high, acfg, init);
  zero_hidden_columns(agent, layers[0]);
  ReplayBuffer buffer(256);
  CurriculumState state;
  state.layers = layers;
  RngStream rng(22), probe_rng(23);
  // a little layer-1 training so the agent is not fresh
  std::vector<Transition> pool;
  for (int i = 0; i < 64; ++i) {
    VectorXd lv(7);
    for (int j = 0; j < 7; ++j) lv[j] = rng.uniform();
    Transition t;
    t.state = pad_input(layers[0], lv, 11).head(9);
    t.goal = {lv[5], lv[6]};
    t.action = VectorXd::NullaryExpr(3, [&](int) { return rng.uniform(-1, 1); });
    t.reward = -1.0;
    t.next_state = t.state;
    pool.push_back(t);
  }
  std::vector<const Transition*> batch;
  for (auto& t : pool) batch.push_back(&t);
  for (int i = 0; i < 25; ++i) agent.train_step(batch);

  std::vector<VectorXd> probes, before;
  for (int i = 0; i < 1000; ++i) {
    VectorXd lv(7);
    for (int j = 0; j < 7; ++j) lv[j] = probe_rng.uniform();
    probes.push_back(pad_input(layers[0], lv, 11));
    before.push_back(agent.actor().forward(probes.back()));
  }
  advance_layer(agent, buffer, state, CriticTransfer::kReset, rng);
  double worst = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    worst = std::max(worst, (agent.actor().forward(probes[i]) - before[i])
                                .cwiseAbs()
                                .maxCoeff());
  }
  report(4, "zero-expansion equivalence", worst < 1e-12,
         "max abs drift " + fmt(worst) + " over 1000 padded inputs");
}

// ---------------------------------------------------------------- criterion 5
void criterion_physics() {
  // projectile drop vs closed form at dt = 1/100 over 1 s
  WorldGeom geom;
  BallState ball;
  ball.pos = {0.5, 6.0};
  ball.vel = {0.25, 0.0};
  for (int i = 0; i < 100; ++i) ball = ball_integrate(ball, 0.01, geom);
  const double drop = 6.0 - ball.pos.y();
  const double drop_err = std::abs(drop - 5.0) / 5.0;
  const double x_err = std::abs((ball.pos.x() - 0.5) - 0.25) / 0.25;

  // every floor bounce scales the impact speed by exactly 0.7
  BallState b2;
  b2.pos = {0.5, 0.8};
  bool bounce_exact = true;
  long bounces = 0;
  for (int i = 0; i < 20000 && !b2.on_ground; ++i) {
    const double vy_pre = b2.vel.y() - geom.gravity * 0.002;  // impact speed
    BallState next = ball_integrate(b2, 0.002, geom);
    if (next.bounce_count.floor > bounces) {
      bounces = next.bounce_count.floor;
      if (next.vel.y() != 0.7 * (-vy_pre)) bounce_exact = false;
    }
    b2 = next;
  }

  // v2 reset holds the ball half the time
  EnvConfig ec;
  ec.env_id = EnvId::kHandV2;
  Env env(ec);
  RngStream rng(55);
  int held = 0;
  for (int i = 0; i < 10000; ++i) {
    env.reset(rng);
    held += env.ball().is_held ? 1 : 0;
  }
  const double f = held / 10000.0;

  report(5, "physics oracle",
         drop_err < 0.02 && x_err < 0.02 && bounce_exact && bounces >= 3 &&
             std::abs(f - 0.5) <= 0.02,
         "drop err " + fmt(drop_err) + ", bounces " + std::to_string(bounces) +
             (bounce_exact ? " all exact 0.7" : " INEXACT") +
             ", in-gripper freq " + fmt(f));
}

// ---------------------------------------------------------------- criterion 6
double chi_square_stat(const std::vector<long>& obs, const VectorXd& p,
                       long n) {
  double s = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double e = p[long(i)] * double(n);
    s += (double(obs[i]) - e) * (double(obs[i]) - e) / e;
  }
  return s;
}

void criterion_per() {
  const int n_items = 32;
  const long draws = 100000;
  const double chi99_df31 = 52.191;  // 99% quantile, 31 degrees of freedom
  double stat_prop = 0.0, stat_unif = 0.0;
  {
    ReplayBuffer buf(64, 0.6, 0.01);
    RngStream rng(66);
    Transition t;
    t.state = VectorXd::Zero(2);
    t.action = VectorXd::Zero(1);
    t.next_state = VectorXd::Zero(2);
    std::vector<std::uint64_t> ids;
    std::vector<double> td;
    for (int i = 0; i < n_items; ++i) {
      ids.push_back(buf.add(t));
      td.push_back(0.05 * (i + 1));
    }
    buf.update_priorities(ids, td);
    VectorXd p(n_items);
    for (int i = 0; i < n_items; ++i) {
      p[i] = std::pow(0.05 * (i + 1) + 0.01, 0.6);
    }
    p /= p.sum();
    std::vector<long> counts(n_items, 0);
    for (long d = 0; d < draws; ++d) {
      counts[std::size_t(buf.sample(1, rng).ids[0])] += 1;
    }
    stat_prop = chi_square_stat(counts, p, draws);
  }
  {
    ReplayBuffer buf(64, 0.0, 0.01);
    RngStream rng(67);
    Transition t;
    t.state = VectorXd::Zero(2);
    t.action = VectorXd::Zero(1);
    t.next_state = VectorXd::Zero(2);
    std::vector<std::uint64_t> ids;
    std::vector<double> td;
    for (int i = 0; i < n_items; ++i) {
      ids.push_back(buf.add(t));
      td.push_back(double(i));
    }
    buf.update_priorities(ids, td);
    std::vector<long> counts(n_items, 0);
    for (long d = 0; d < draws; ++d) {
      counts[std::size_t(buf.sample(1, rng).ids[0])] += 1;
    }
    stat_unif = chi_square_stat(
        counts, VectorXd::Constant(n_items, 1.0 / n_items), draws);
  }
  report(6, "prioritized sampling statistics",
         stat_prop < chi99_df31 && stat_unif < chi99_df31,
         "chi-square " + fmt(stat_prop) + " (proportional), " +
             fmt(stat_unif) + " (alpha=0) vs 52.19 at df=31");
}

// --------------------------------------------------------- training criteria
std::vector<double> column_values(const std::filesystem::path& csv, int col) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string field;
    for (int c = 0; c <= col; ++c) std::getline(ls, field, ',');
    out.push_back(std::stod(field));
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ExperimentConfig smoke_config() {
  ExperimentConfig cfg;
  cfg.env_id = EnvId::kHandReach;
  cfg.algo = Algo::kFilteredIbs;
  cfg.epochs = 50;
  cfg.cycles_per_epoch = 4;
  cfg.episodes_per_cycle = 4;
  cfg.opt_steps_per_cycle = 50;
  cfg.eval_episodes = 25;
  return cfg;
}

void criterion_training_smoke(const std::filesystem::path& dir) {
  int reached = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg = smoke_config();
    cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto csv = run_experiment(cfg, dir);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const auto success = column_values(csv, 1);
    double best = 0.0;
    for (double s : success) best = std::max(best, s);
    if (best >= 0.8 && secs <= 1800.0) ++reached;
    detail += (detail.empty() ? "" : ", ") + fmt(best) + "@" +
              fmt(secs) + "s";
  }
  report(7, "training smoke on the reach task", reached >= 3,
         "seeds at >=80%: " + std::to_string(reached) + "/5 (best/time: " +
             detail + ")");
}

ExperimentConfig hand_v1_config(Algo algo, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.env_id = EnvId::kHandV1;
  cfg.algo = algo;
  cfg.seed = seed;
  cfg.epochs = 100;
  cfg.cycles_per_epoch = 12;
  cfg.episodes_per_cycle = 8;
  cfg.opt_steps_per_cycle = 40;
  cfg.eval_episodes = 25;
  return cfg;
}

void criterion_sequential_direction(const std::filesystem::path& dir) {
  std::vector<double> vanilla_success, cher_success;
  std::vector<double> vanilla_pos, cher_pos;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto v_csv = run_experiment(hand_v1_config(Algo::kHer, seed), dir);
    const auto c_csv =
        run_experiment(hand_v1_config(Algo::kCherIbs, seed), dir);
    vanilla_success.push_back(column_values(v_csv, 1).back());
    cher_success.push_back(column_values(c_csv, 1).back());
    vanilla_pos.push_back(column_values(v_csv, 4).back());
    cher_pos.push_back(column_values(c_csv, 4).back());
  }
  const double v_med = median(vanilla_success);
  const double c_med = median(cher_success);
  const double v_pos = median(vanilla_pos);
  const double c_pos = median(cher_pos);
  report(8, "curriculum direction on the sequential task",
         v_med <= 0.05 && c_med > v_med && c_pos >= 10.0 * std::max(v_pos, 1.0),
         "median success vanilla " + fmt(v_med) + " vs curriculum " +
             fmt(c_med) + "; median positives " + fmt(v_pos) + " vs " +
             fmt(c_pos));
}

void criterion_bias_direction(const std::filesystem::path& dir) {
  std::vector<double> q0_unf, q0_fil, sr_unf, sr_fil;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg;
    cfg.env_id = EnvId::kStickyLine;
    cfg.seed = seed;
    cfg.epochs = 40;
    cfg.cycles_per_epoch = 2;
    cfg.episodes_per_cycle = 4;
    cfg.opt_steps_per_cycle = 40;
    cfg.eval_episodes = 25;
    cfg.algo = Algo::kHer;
    const auto u_csv = run_experiment(cfg, dir);
    cfg.algo = Algo::kFiltered;
    const auto f_csv = run_experiment(cfg, dir);
    q0_unf.push_back(column_values(u_csv, 3).back());
    q0_fil.push_back(column_values(f_csv, 3).back());
    sr_unf.push_back(column_values(u_csv, 1).back());
    sr_fil.push_back(column_values(f_csv, 1).back());
  }
  report(9, "value-bias direction on the sticky line",
         median(q0_unf) >= median(q0_fil) && median(sr_fil) >= median(sr_unf),
         "median q0 " + fmt(median(q0_unf)) + " (unfiltered) vs " +
             fmt(median(q0_fil)) + " (filtered); success " +
             fmt(median(sr_unf)) + " vs " + fmt(median(sr_fil)));
}

void criterion_determinism(const std::filesystem::path& dir) {
  ExperimentConfig cfg;
  cfg.env_id = EnvId::kHandV1;
  cfg.algo = Algo::kFilteredIbs;
  cfg.seed = 99;
  cfg.epochs = 2;
  cfg.cycles_per_epoch = 2;
  cfg.episodes_per_cycle = 2;
  cfg.opt_steps_per_cycle = 5;
  cfg.eval_episodes = 5;
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto a = run_experiment(cfg, dir / "det_a");
  const auto b = run_experiment(cfg, dir / "det_b");
  report(10, "byte-identical determinism", slurp(a) == slurp(b),
         "two runs of the same seed compared byte for byte");
}

}  // namespace

int main() {
  const auto dir =
      std::filesystem::temp_directory_path() / "herlab_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  criterion_filter_exactness();
  criterion_ibs_direction();
  criterion_numerics();
  criterion_zero_expansion();
  criterion_physics();
  criterion_per();
  criterion_determinism(dir);
  criterion_training_smoke(dir);
  criterion_bias_direction(dir);
  criterion_sequential_direction(dir);

  std::filesystem::remove_all(dir);
  if (g_failures > 0) {
    std::printf("%d criteria FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
