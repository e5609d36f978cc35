#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "herlab/curriculum.hpp"

using namespace herlab;

namespace {

Agent make_agent(int input_dim, std::uint64_t seed = 1) {
  VectorXd low = VectorXd::Constant(3, -1.0);
  VectorXd high = VectorXd::Constant(3, 1.0);
  AgentConfig cfg;
  cfg.hidden = {16, 16};
  RngStream rng(seed);
  return Agent(input_dim, low, high, cfg, rng);
}

}  // namespace

TEST_CASE("two-layer task decomposition for the hand throw task") {
  auto layers = get_curriculum(EnvId::kHandV1);
  REQUIRE(layers.size() == 2);
  // layer 1: reach — achieved is the hand position, goal the ball position
  CHECK(layers[0].achieved_idx == std::vector<int>{0, 1});
  CHECK(layers[0].desired_idx == std::vector<int>{5, 6});
  CHECK(layers[0].reward_threshold == 0.02);
  CHECK(layers[0].pad_width() == 4);  // ball position and velocity hidden
  // layer 2: full table, goal slots, black-hole radius
  CHECK(layers[1].achieved_idx == std::vector<int>{5, 6});
  CHECK(layers[1].desired_idx == std::vector<int>{9, 10});
  CHECK(layers[1].reward_threshold == 0.05);
  CHECK(layers[1].pad_width() == 0);
  CHECK(layers[0].final_width == layers[1].final_width);

  CHECK(get_curriculum(EnvId::kRobotV1).size() == 2);
  CHECK_THROWS_AS(get_curriculum(EnvId::kHandV0), std::invalid_argument);
}

TEST_CASE("projection is a pure gather") {
  auto layers = get_curriculum(EnvId::kHandV1);
  VectorXd full(11);
  full << 0.1, 0.2, 0.3, 0.4, 1.0, 0.6, 0.7, 0.8, 0.9, 0.95, 0.35;
  GoalObservation l1 = state_to_obs(layers[0], full);
  CHECK(l1.observation.size() == 5);
  CHECK(l1.observation[0] == 0.1);
  CHECK(l1.observation[4] == 1.0);
  CHECK(l1.achieved_goal == Vector2d{0.1, 0.2});
  CHECK(l1.desired_goal == Vector2d{0.6, 0.7});

  GoalObservation l2 = state_to_obs(layers[1], full);
  CHECK(l2.observation.size() == 9);
  CHECK(l2.achieved_goal == Vector2d{0.6, 0.7});
  CHECK(l2.desired_goal == Vector2d{0.95, 0.35});

  // hand on top of the ball solves layer 1
  full[0] = full[5];
  full[1] = full[6];
  GoalObservation hit = state_to_obs(layers[0], full);
  CHECK(compute_reward(hit.achieved_goal, hit.desired_goal, 0.02) == 0.0);

  SubTaskSpec permuted = layers[0];
  std::swap(permuted.obs_idx[0], permuted.obs_idx[1]);
  GoalObservation p = state_to_obs(permuted, full);
  CHECK(p.observation[0] == full[1]);
  CHECK(p.observation[1] == full[0]);

  SubTaskSpec broken = layers[0];
  broken.obs_idx.push_back(99);
  CHECK_THROWS_AS(state_to_obs(broken, full), std::out_of_range);
}

TEST_CASE("zero padding preserves slot layout and is idempotent") {
  auto layers = get_curriculum(EnvId::kHandV1);
  VectorXd layer_vec(7);  // 5 obs + 2 goal
  layer_vec << 1, 2, 3, 4, 5, 8, 9;
  VectorXd padded = pad_input(layers[0], layer_vec, 11);
  REQUIRE(padded.size() == 11);
  CHECK(padded[0] == 1);
  CHECK(padded[4] == 5);
  CHECK(padded[5] == 0);  // hidden ball slots
  CHECK(padded[6] == 0);
  CHECK(padded[7] == 0);
  CHECK(padded[8] == 0);
  CHECK(padded[9] == 8);  // goal slots always live at the end
  CHECK(padded[10] == 9);
  CHECK(pad_input(layers[0], padded, 11) == padded);  // idempotent
  // final layer is the identity
  VectorXd full_vec = VectorXd::LinSpaced(11, 0.0, 1.0);
  CHECK(pad_input(layers[1], full_vec, 11) == full_vec);
  VectorXd wrong(5);
  wrong.setZero();
  CHECK_THROWS_AS(pad_input(layers[0], wrong, 11), std::invalid_argument);
}

TEST_CASE("expertise gate needs a full window above the bar") {
  std::deque<double> h;
  for (int i = 0; i < 20; ++i) h.push_back(1.0);
  CHECK(learned_task(h, 0.9, 20));
  h.assign(20, 1.0);
  for (int i = 0; i < 3; ++i) h[std::size_t(i)] = 0.0;  // 17 of 20
  CHECK_FALSE(learned_task(h, 0.9, 20));
  std::deque<double> short_h(19, 1.0);
  CHECK_FALSE(learned_task(short_h, 0.9, 20));
  // appending one more success can only help
  short_h.push_back(1.0);
  CHECK(learned_task(short_h, 0.9, 20));
}

TEST_CASE("advancing a layer transfers the actor untouched") {
  auto layers = get_curriculum(EnvId::kHandV1);
  Agent agent = make_agent(layers[0].final_width, 3);
  zero_hidden_columns(agent, layers[0]);
  ReplayBuffer buffer(128);
  RngStream rng(5);
  // some training on layer-1-style padded data so the nets are not fresh
  std::vector<Transition> pool;
  for (int i = 0; i < 32; ++i) {
    Transition t;
    VectorXd layer_vec(7);
    for (int j = 0; j < 7; ++j) layer_vec[j] = rng.uniform();
    t.state = pad_input(layers[0], layer_vec, 11).head(9);
    t.goal = {layer_vec[5], layer_vec[6]};
    t.action = VectorXd::NullaryExpr(3, [&](int) { return rng.uniform(-1, 1); });
    t.reward = -1.0;
    t.next_state = t.state;
    pool.push_back(t);
    buffer.add(t);
  }
  std::vector<const Transition*> batch;
  for (const auto& t : pool) batch.push_back(&t);
  for (int i = 0; i < 20; ++i) agent.train_step(batch);

  // actor weight columns for padded slots never received gradient
  for (int col : {5, 6, 7, 8}) {
    CHECK(agent.actor().layers()[0].w.col(col).cwiseAbs().maxCoeff() == 0.0);
  }

  CurriculumState state;
  state.layers = layers;
  const Mlp actor_before = agent.actor();
  std::vector<VectorXd> probes;
  std::vector<VectorXd> outputs;
  RngStream prng(7);
  for (int i = 0; i < 1000; ++i) {
    VectorXd layer_vec(7);
    for (int j = 0; j < 7; ++j) layer_vec[j] = prng.uniform();
    VectorXd padded = pad_input(layers[0], layer_vec, 11);
    probes.push_back(padded);
    outputs.push_back(agent.actor().forward(padded));
  }

  advance_layer(agent, buffer, state, CriticTransfer::kReset, rng);
  CHECK(state.layer == 1);
  CHECK(buffer.size() == 0);
  CHECK(state.history.empty());
  for (std::size_t l = 0; l < actor_before.layers().size(); ++l) {
    CHECK(agent.actor().layers()[l].w == actor_before.layers()[l].w);
    CHECK(agent.actor().layers()[l].b == actor_before.layers()[l].b);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    worst = std::max(worst, (agent.actor().forward(probes[i]) - outputs[i])
                                .cwiseAbs()
                                .maxCoeff());
  }
  CHECK(worst < 1e-12);
  // critic columns for the newly revealed slots were reset to zero
  for (int col : {5, 6, 7, 8}) {
    CHECK(agent.critic().layers()[0].w.col(col).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(
      advance_layer(agent, buffer, state, CriticTransfer::kReset, rng),
      std::logic_error);
}

TEST_CASE("transfer modes map to the documented blend factors") {
  CHECK(critic_transfer_alpha(CriticTransfer::kReset) == 0.0);
  CHECK(critic_transfer_alpha(CriticTransfer::kDecreased) == 0.1);
  CHECK(critic_transfer_alpha(CriticTransfer::kRegular) == 1.0);
}
