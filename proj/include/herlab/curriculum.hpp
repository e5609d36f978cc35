#pragma once

#include <deque>
#include <vector>

#include "herlab/ddpg.hpp"
#include "herlab/env.hpp"
#include "herlab/replay.hpp"
#include "herlab/types.hpp"

namespace herlab {

// One curriculum layer: a gather-projection of the full state‖goal vector.
// Indices address the final layer's input layout; the last two entries of
// that layout are the goal slots.
struct SubTaskSpec {
  std::vector<int> obs_idx;   // state slots visible to this layer
  std::vector<int> achieved_idx;
  std::vector<int> desired_idx;
  double reward_threshold = 0.05;
  int final_width = 0;        // state slots + 2 goal slots

  int pad_width() const { return final_width - 2 - int(obs_idx.size()); }
};

struct CurriculumState {
  std::vector<SubTaskSpec> layers;
  int layer = 0;
  std::deque<double> history;  // per-episode success flags, newest at back
  double c = 0.9;
  int k_window = 20;

  const SubTaskSpec& current() const { return layers[std::size_t(layer)]; }
  bool at_final() const { return layer + 1 == int(layers.size()); }
};

// Two layers per sequential task: reach the object, then send it home.
std::vector<SubTaskSpec> get_curriculum(EnvId task_id);

// Pure gather; no arithmetic.
GoalObservation state_to_obs(const SubTaskSpec& spec,
                             const VectorXd& full_state_and_goal);

// Scatter a layer vector (obs‖goal) into the final layout, zeros in the
// hidden slots. A vector already at final width passes through unchanged.
VectorXd pad_input(const SubTaskSpec& spec, const VectorXd& layer_obs_and_goal,
                   int final_width);

// True iff the history holds at least k_window entries whose trailing
// k_window-mean reaches c.
bool learned_task(const std::deque<double>& history, double c, int k_window);

enum class CriticTransfer { kReset, kDecreased, kRegular };
double critic_transfer_alpha(CriticTransfer mode);

// Zero the first-layer weight columns of every network for the state slots
// hidden from the given layer. Called once before layer-1 training so that
// hidden dimensions start "with all weights equal" (zero) and stay zero.
void zero_hidden_columns(Agent& agent, const SubTaskSpec& layer);

// Move to the next layer: re-initialize the critic's columns for newly
// revealed slots, empty the replay buffer, clear the success history. Actor
// parameters are untouched. The caller rebuilds the virtual-goal grid.
void advance_layer(Agent& agent, ReplayBuffer& buffer, CurriculumState& state,
                   CriticTransfer mode, RngStream& rng);

}  // namespace herlab
