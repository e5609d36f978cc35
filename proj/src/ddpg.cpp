#include "herlab/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace herlab {
namespace {

std::vector<int> net_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

std::vector<Activation> net_acts(std::size_t n_hidden, Activation out_act) {
  std::vector<Activation> a(n_hidden, Activation::kRelu);
  a.push_back(out_act);
  return a;
}

}  // namespace

Agent::Agent(int input_dim, VectorXd action_low, VectorXd action_high,
             AgentConfig cfg, RngStream& init_rng)
    : cfg_(std::move(cfg)),
      input_dim_(input_dim),
      action_low_(std::move(action_low)),
      action_high_(std::move(action_high)) {
  if (input_dim_ < 1 || action_low_.size() != action_high_.size() ||
      action_low_.size() == 0) {
    throw std::invalid_argument("invalid agent dimensions");
  }
  if (cfg_.gamma < 0.0 || cfg_.gamma >= 1.0 || cfg_.tau < 0.0 ||
      cfg_.tau > 1.0 || cfg_.epsilon < 0.0 || cfg_.epsilon > 1.0 ||
      cfg_.epsilon < cfg_.epsilon_final) {
    throw std::invalid_argument("invalid agent hyperparameters");
  }
  const int act = int(action_low_.size());
  actor_ = Mlp(net_widths(input_dim_, cfg_.hidden, act),
               net_acts(cfg_.hidden.size(), Activation::kTanh), init_rng);
  critic_ = Mlp(net_widths(input_dim_ + act, cfg_.hidden, 1),
                net_acts(cfg_.hidden.size(), Activation::kLinear), init_rng,
                cfg_.batch_norm);
  target_actor_ = actor_;
  target_critic_ = critic_;
}

VectorXd Agent::rescale_to_box(const VectorXd& tanh_out) const {
  return action_low_.array() +
         (tanh_out.array() + 1.0) * 0.5 *
             (action_high_ - action_low_).array();
}

VectorXd Agent::select_action(const VectorXd& obs_goal, bool explore,
                              RngStream& rng, ExploreBranch* branch) const {
  if (obs_goal.size() != input_dim_) {
    throw std::invalid_argument("observation width mismatch");
  }
  VectorXd greedy = rescale_to_box(actor_.forward(obs_goal));
  ExploreBranch picked = ExploreBranch::kGreedy;
  VectorXd a = greedy;
  if (explore) {
    const double u = rng.uniform();
    if (u < 0.2 * cfg_.epsilon) {
      picked = ExploreBranch::kUniform;
      a.resize(action_low_.size());
      for (int i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform(action_low_[i], action_high_[i]);
      }
    } else if (u < cfg_.epsilon) {
      picked = ExploreBranch::kGaussian;
      for (int i = 0; i < a.size(); ++i) {
        const double sigma =
            cfg_.noise_scale * (action_high_[i] - action_low_[i]);
        a[i] += sigma * rng.normal();
      }
    }
  }
  if (branch != nullptr) *branch = picked;
  return a.cwiseMax(action_low_).cwiseMin(action_high_);
}

void Agent::epsilon_decay() {
  cfg_.epsilon =
      std::max(cfg_.epsilon_decay_rate * cfg_.epsilon, cfg_.epsilon_final);
}

MatrixXd Agent::batch_inputs(const std::vector<const Transition*>& batch,
                             bool next) const {
  MatrixXd X(input_dim_, batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Transition& t = *batch[j];
    const VectorXd& s = next ? t.next_state : t.state;
    if (s.size() + 2 != input_dim_) {
      throw std::invalid_argument("transition state width mismatch");
    }
    X.col(long(j)) << s, t.goal;
  }
  return X;
}

VectorXd Agent::td_targets(const std::vector<const Transition*>& batch) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const MatrixXd next_in = batch_inputs(batch, /*next=*/true);
  MatrixXd next_act = target_actor_.forward(next_in);
  const int act = action_dim();
  MatrixXd critic_in(input_dim_ + act, long(batch.size()));
  for (long j = 0; j < long(batch.size()); ++j) {
    VectorXd a = rescale_to_box(next_act.col(j));
    critic_in.col(j) << next_in.col(j), a;
  }
  const MatrixXd next_q = target_critic_.forward(critic_in);
  VectorXd y(long(batch.size()));
  for (long j = 0; j < long(batch.size()); ++j) {
    const Transition& t = *batch[std::size_t(j)];
    y[j] = t.success_terminal ? t.reward
                              : t.reward + cfg_.gamma * next_q(0, j);
  }
  return y;
}

VectorXd Agent::clip_target_range(VectorXd y, double gamma) {
  const double lo = -1.0 / (1.0 - gamma);
  for (int i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], lo, 0.0);
  return y;
}

Agent::TrainResult Agent::train_step(
    const std::vector<const Transition*>& batch) {
  const long B = long(batch.size());
  const VectorXd y = clip_target_range(td_targets(batch), cfg_.gamma);
  const MatrixXd states = batch_inputs(batch, /*next=*/false);
  const int act = action_dim();

  // Critic regression toward the clipped targets.
  MatrixXd critic_in(input_dim_ + act, B);
  for (long j = 0; j < B; ++j) {
    critic_in.col(j) << states.col(j), batch[std::size_t(j)]->action;
  }
  Mlp::ForwardCache ccache;
  const MatrixXd q = critic_.forward(critic_in, &ccache);
  VectorXd residual = q.row(0).transpose() - y;
  TrainResult out;
  out.critic_loss = residual.squaredNorm() / double(B);
  out.td_errors = residual.cwiseAbs();
  MatrixXd upstream = (2.0 / double(B)) * residual.transpose();
  critic_.optimizer_step(critic_.backward(ccache, upstream),
                         GradClipPolicy{cfg_.grad_clip}, cfg_.critic_lr);

  // Actor ascends Q(s, mu(s)) through the (frozen) critic.
  Mlp::ForwardCache acache;
  const MatrixXd u = actor_.forward(states, &acache);
  MatrixXd actor_critic_in(input_dim_ + act, B);
  const VectorXd range = action_high_ - action_low_;
  for (long j = 0; j < B; ++j) {
    actor_critic_in.col(j) << states.col(j), rescale_to_box(u.col(j));
  }
  Mlp::ForwardCache c2;
  const MatrixXd q_pi = critic_.forward(actor_critic_in, &c2);
  out.actor_objective = q_pi.row(0).mean();
  MatrixXd critic_upstream = MatrixXd::Constant(1, B, -1.0 / double(B));
  MatrixXd input_grad;
  (void)critic_.backward(c2, critic_upstream, &input_grad);
  MatrixXd action_grad = input_grad.bottomRows(act);
  for (long j = 0; j < B; ++j) {
    action_grad.col(j).array() *= 0.5 * range.array();
  }
  actor_.optimizer_step(actor_.backward(acache, action_grad),
                        GradClipPolicy{cfg_.grad_clip}, cfg_.actor_lr);

  soft_update(target_actor_, actor_, cfg_.tau);
  soft_update(target_critic_, critic_, cfg_.tau);
  return out;
}

double Agent::value_of(const VectorXd& obs_goal) const {
  VectorXd a = rescale_to_box(actor_.forward(obs_goal));
  VectorXd in(input_dim_ + action_dim());
  in << obs_goal, a;
  return critic_.forward(in)[0];
}

void Agent::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  actor_.save(dir / "actor.txt", dir / "actor.bin");
  critic_.save(dir / "critic.txt", dir / "critic.bin");
  target_actor_.save(dir / "target_actor.txt", dir / "target_actor.bin");
  target_critic_.save(dir / "target_critic.txt", dir / "target_critic.bin");
  std::ofstream m(dir / "agent.txt");
  m << "gamma " << cfg_.gamma << "\n"
    << "tau " << cfg_.tau << "\n"
    << "epsilon " << cfg_.epsilon << "\n"
    << "input_dim " << input_dim_ << "\n"
    << "action_dim " << action_dim() << "\n";
}

void Agent::load(const std::filesystem::path& dir) {
  actor_ = Mlp::load(dir / "actor.txt", dir / "actor.bin");
  critic_ = Mlp::load(dir / "critic.txt", dir / "critic.bin");
  target_actor_ = Mlp::load(dir / "target_actor.txt", dir / "target_actor.bin");
  target_critic_ =
      Mlp::load(dir / "target_critic.txt", dir / "target_critic.bin");
  std::ifstream m(dir / "agent.txt");
  std::string key;
  double v;
  while (m >> key >> v) {
    if (key == "gamma") cfg_.gamma = v;
    if (key == "tau") cfg_.tau = v;
    if (key == "epsilon") cfg_.epsilon = v;
  }
}

}  // namespace herlab
