#include "herlab/curriculum.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace herlab {
namespace {

std::vector<int> iota_idx(int first, int count) {
  std::vector<int> v(static_cast<std::size_t>(count), 0);
  std::iota(v.begin(), v.end(), first);
  return v;
}

}  // namespace

std::vector<SubTaskSpec> get_curriculum(EnvId task_id) {
  switch (task_id) {
    case EnvId::kHandV1:
    case EnvId::kHandWallV1: {
      // Scaled layout: hand pos/vel/grip (0-4), ball pos (5,6), ball vel
      // (7,8), goal slots (9,10). Reach layer sees only the hand; its goal
      // is the ball position, its success radius the ball radius.
      const int W = 11;
      SubTaskSpec reach{iota_idx(0, 5), {0, 1}, {5, 6}, 0.02, W};
      SubTaskSpec throw_home{iota_idx(0, 9), {5, 6}, {9, 10}, 0.05, W};
      return {reach, throw_home};
    }
    case EnvId::kRobotV1: {
      // Scaled layout: joint cos/sin (0-3), tip pos (4,5), joint rates
      // (6,7), tip vel (8,9), grip (10), ball pos (11,12), ball vel
      // (13,14), goal slots (15,16).
      const int W = 17;
      SubTaskSpec reach{iota_idx(0, 11), {4, 5}, {11, 12}, 0.02, W};
      SubTaskSpec throw_home{iota_idx(0, 15), {11, 12}, {15, 16}, 0.05, W};
      return {reach, throw_home};
    }
    default:
      throw std::invalid_argument("no curriculum for env " + to_string(task_id));
  }
}

GoalObservation state_to_obs(const SubTaskSpec& spec,
                             const VectorXd& full_state_and_goal) {
  auto gather = [&](const std::vector<int>& idx) {
    VectorXd out(long(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= full_state_and_goal.size()) {
        throw std::out_of_range("projection index out of range");
      }
      out[long(i)] = full_state_and_goal[idx[i]];
    }
    return out;
  };
  GoalObservation obs;
  obs.observation = gather(spec.obs_idx);
  VectorXd a = gather(spec.achieved_idx);
  VectorXd d = gather(spec.desired_idx);
  if (a.size() != 2 || d.size() != 2) {
    throw std::invalid_argument("goal projections must be 2-vectors");
  }
  obs.achieved_goal = Vector2d(a[0], a[1]);
  obs.desired_goal = Vector2d(d[0], d[1]);
  return obs;
}

VectorXd pad_input(const SubTaskSpec& spec, const VectorXd& layer_obs_and_goal,
                   int final_width) {
  if (layer_obs_and_goal.size() == final_width) return layer_obs_and_goal;
  if (layer_obs_and_goal.size() != long(spec.obs_idx.size()) + 2 ||
      layer_obs_and_goal.size() > final_width) {
    throw std::invalid_argument("layer vector width mismatch");
  }
  VectorXd out = VectorXd::Zero(final_width);
  for (std::size_t i = 0; i < spec.obs_idx.size(); ++i) {
    out[spec.obs_idx[i]] = layer_obs_and_goal[long(i)];
  }
  out[final_width - 2] = layer_obs_and_goal[layer_obs_and_goal.size() - 2];
  out[final_width - 1] = layer_obs_and_goal[layer_obs_and_goal.size() - 1];
  return out;
}

bool learned_task(const std::deque<double>& history, double c, int k_window) {
  if (int(history.size()) < k_window) return false;
  double sum = 0.0;
  for (int i = 0; i < k_window; ++i) {
    sum += history[history.size() - 1 - std::size_t(i)];
  }
  return sum / k_window >= c;
}

double critic_transfer_alpha(CriticTransfer mode) {
  switch (mode) {
    case CriticTransfer::kReset: return 0.0;
    case CriticTransfer::kDecreased: return 0.1;
    case CriticTransfer::kRegular: return 1.0;
  }
  return 0.0;
}

void zero_hidden_columns(Agent& agent, const SubTaskSpec& layer) {
  std::vector<int> hidden;
  for (int slot = 0; slot < layer.final_width - 2; ++slot) {
    if (std::find(layer.obs_idx.begin(), layer.obs_idx.end(), slot) ==
        layer.obs_idx.end()) {
      hidden.push_back(slot);
    }
  }
  if (hidden.empty()) return;
  RngStream unused(0);  // alpha 0 draws nothing into the columns
  agent.actor().reinit_input_columns(hidden, 0.0, unused);
  agent.critic().reinit_input_columns(hidden, 0.0, unused);
  agent.target_actor().reinit_input_columns(hidden, 0.0, unused);
  agent.target_critic().reinit_input_columns(hidden, 0.0, unused);
}

void advance_layer(Agent& agent, ReplayBuffer& buffer, CurriculumState& state,
                   CriticTransfer mode, RngStream& rng) {
  if (state.at_final()) throw std::logic_error("no next curriculum layer");
  const SubTaskSpec& cur = state.current();
  const SubTaskSpec& next = state.layers[std::size_t(state.layer) + 1];
  std::vector<int> revealed;
  for (int idx : next.obs_idx) {
    if (std::find(cur.obs_idx.begin(), cur.obs_idx.end(), idx) ==
        cur.obs_idx.end()) {
      revealed.push_back(idx);
    }
  }
  if (!revealed.empty()) {
    agent.critic().reinit_input_columns(revealed, critic_transfer_alpha(mode),
                                        rng);
  }
  buffer.clear();
  state.history.clear();
  ++state.layer;
}

}  // namespace herlab
