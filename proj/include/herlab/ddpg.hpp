#pragma once

#include <filesystem>
#include <vector>

#include "herlab/nn.hpp"
#include "herlab/rng.hpp"
#include "herlab/types.hpp"

namespace herlab {

struct AgentConfig {
  double gamma = 0.98;
  double tau = 0.05;
  double actor_lr = 0.001;
  double critic_lr = 0.001;
  double grad_clip = 3.0;
  double epsilon = 1.0;
  double epsilon_final = 0.05;
  double epsilon_decay_rate = 0.95;
  double noise_scale = 0.05;  // Gaussian sigma as a fraction of action range
  std::vector<int> hidden = {64, 64, 64};
  bool batch_norm = false;
};

enum class ExploreBranch { kGreedy, kGaussian, kUniform };

// Goal-conditioned actor-critic. Every network input is state‖goal; the
// critic additionally takes the action concatenated onto that input.
class Agent {
 public:
  Agent(int input_dim, VectorXd action_low, VectorXd action_high,
        AgentConfig cfg, RngStream& init_rng);

  // Greedy action when explore is false. Otherwise a three-way mixture:
  // 1-eps greedy, 0.8*eps greedy plus Gaussian noise, 0.2*eps uniform.
  VectorXd select_action(const VectorXd& obs_goal, bool explore,
                         RngStream& rng,
                         ExploreBranch* branch = nullptr) const;

  void epsilon_decay();  // eps <- max(rate * eps, eps_final), once per epoch

  VectorXd td_targets(const std::vector<const Transition*>& batch) const;
  static VectorXd clip_target_range(VectorXd y, double gamma);

  struct TrainResult {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    VectorXd td_errors;
  };
  TrainResult train_step(const std::vector<const Transition*>& batch);

  // Q(s‖g, mu(s‖g)) under the online networks.
  double value_of(const VectorXd& obs_goal) const;

  double epsilon() const { return cfg_.epsilon; }
  double gamma() const { return cfg_.gamma; }
  const AgentConfig& config() const { return cfg_; }
  int input_dim() const { return input_dim_; }
  int action_dim() const { return int(action_low_.size()); }

  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Mlp& target_actor() { return target_actor_; }
  Mlp& target_critic() { return target_critic_; }

  void save(const std::filesystem::path& dir) const;
  void load(const std::filesystem::path& dir);

 private:
  VectorXd rescale_to_box(const VectorXd& tanh_out) const;
  MatrixXd batch_inputs(const std::vector<const Transition*>& batch,
                        bool next) const;

  AgentConfig cfg_;
  int input_dim_;
  VectorXd action_low_;
  VectorXd action_high_;
  Mlp actor_;
  Mlp critic_;
  Mlp target_actor_;
  Mlp target_critic_;
};

}  // namespace herlab
