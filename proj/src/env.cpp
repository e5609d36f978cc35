#include "herlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace herlab {
namespace {

constexpr double kDeg = M_PI / 180.0;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

Vector2d clamp_to_screen(Vector2d p, double margin) {
  return {clamp(p.x(), margin, 1.0 - margin), clamp(p.y(), margin, 1.0 - margin)};
}

}  // namespace

std::string to_string(EnvId id) {
  switch (id) {
    case EnvId::kHandReach: return "hand_reach";
    case EnvId::kHandV0: return "hand_v0";
    case EnvId::kHandV1: return "hand_v1";
    case EnvId::kHandV2: return "hand_v2";
    case EnvId::kHandWallV0: return "hand_wall_v0";
    case EnvId::kHandWallV1: return "hand_wall_v1";
    case EnvId::kHandWallV2: return "hand_wall_v2";
    case EnvId::kRobotReach: return "robot_reach";
    case EnvId::kRobotV0: return "robot_v0";
    case EnvId::kRobotV1: return "robot_v1";
    case EnvId::kRobotV2: return "robot_v2";
    case EnvId::kStickyLine: return "sticky_line";
  }
  return "?";
}

EnvId env_id_from_string(const std::string& s) {
  static const std::vector<EnvId> all = {
      EnvId::kHandReach,  EnvId::kHandV0,     EnvId::kHandV1,
      EnvId::kHandV2,     EnvId::kHandWallV0, EnvId::kHandWallV1,
      EnvId::kHandWallV2, EnvId::kRobotReach, EnvId::kRobotV0,
      EnvId::kRobotV1,    EnvId::kRobotV2,    EnvId::kStickyLine};
  for (EnvId id : all) {
    if (to_string(id) == s) return id;
  }
  throw std::invalid_argument("unknown env id: " + s);
}

double EnvConfig::resolved_threshold() const {
  if (reward_threshold > 0.0) return reward_threshold;
  switch (env_id) {
    case EnvId::kHandReach:
    case EnvId::kRobotReach:
      return 0.02;
    default:
      return 0.05;
  }
}

BallState ball_integrate(BallState ball, double dt, const WorldGeom& geom) {
  if (ball.is_held || ball.dormant) return ball;
  const double r = geom.radius;
  if (ball.on_ground) {
    // Kinetic friction decelerates horizontal rolling.
    const double decel = geom.friction * geom.gravity * dt;
    if (std::abs(ball.vel.x()) <= decel) {
      ball.vel.x() = 0.0;
    } else {
      ball.vel.x() -= std::copysign(decel, ball.vel.x());
    }
    ball.pos.x() += ball.vel.x() * dt;
    ball.vel.y() = 0.0;
    ball.pos.y() = r;
  } else {
    ball.vel.y() -= geom.gravity * dt;
    ball.pos += ball.vel * dt;
    if (ball.pos.y() < r && ball.vel.y() < 0.0) {
      ball.pos.y() = r;
      if (std::abs(ball.vel.y()) <= geom.settle_speed) {
        ball.vel.y() = 0.0;
        ball.on_ground = true;
      } else {
        ball.vel.y() = -geom.restitution * ball.vel.y();
        ball.bounce_count.floor += 1;
      }
    }
    if (ball.pos.y() > 1.0 - r && ball.vel.y() > 0.0) {
      ball.pos.y() = 1.0 - r;
      ball.vel.y() = -geom.restitution * ball.vel.y();
      ball.bounce_count.border += 1;
    }
  }
  if (ball.pos.x() < r && ball.vel.x() < 0.0) {
    ball.pos.x() = r;
    ball.vel.x() = -geom.restitution * ball.vel.x();
    ball.bounce_count.border += 1;
  }
  if (ball.pos.x() > 1.0 - r && ball.vel.x() > 0.0) {
    ball.pos.x() = 1.0 - r;
    ball.vel.x() = -geom.restitution * ball.vel.x();
    ball.bounce_count.border += 1;
  }
  if (geom.wall) {
    const double half = 0.5 * geom.wall->thickness + r;
    const double dx = ball.pos.x() - geom.wall->x;
    if (std::abs(dx) < half && ball.pos.y() < geom.wall->height) {
      if (ball.vel.x() > 0.0 && dx < 0.0) {
        ball.pos.x() = geom.wall->x - half;
        ball.vel.x() = -geom.restitution * ball.vel.x();
        ball.bounce_count.obstacle += 1;
      } else if (ball.vel.x() < 0.0 && dx > 0.0) {
        ball.pos.x() = geom.wall->x + half;
        ball.vel.x() = -geom.restitution * ball.vel.x();
        ball.bounce_count.obstacle += 1;
      }
    }
  }
  return ball;
}

std::pair<Vector2d, Vector2d> forward_kinematics(const VectorXd& theta,
                                                 const VectorXd& theta_dot,
                                                 const Vector2d& base,
                                                 const VectorXd& link_lengths) {
  if (theta.size() != theta_dot.size() || theta.size() != link_lengths.size()) {
    throw std::invalid_argument("kinematics vectors must have equal length");
  }
  Vector2d pos = base;
  Vector2d vel{0.0, 0.0};
  double cum_angle = 0.0;
  double cum_rate = 0.0;
  for (int i = 0; i < theta.size(); ++i) {
    cum_angle += theta[i];
    cum_rate += theta_dot[i];
    const double l = link_lengths[i];
    pos += l * Vector2d{std::cos(cum_angle), std::sin(cum_angle)};
    vel += l * cum_rate * Vector2d{-std::sin(cum_angle), std::cos(cum_angle)};
  }
  return {pos, vel};
}

bool try_grab(const Vector2d& gripper, const BallState& ball, double grab_tol) {
  return (gripper - ball.pos).norm() < grab_tol;
}

VectorXd scale_observation(const VectorXd& raw, EnvId id, const EnvConfig& cfg) {
  switch (id) {
    case EnvId::kHandReach: {
      if (raw.size() != 5) throw std::invalid_argument("hand_reach raw layout");
      VectorXd out(5);
      out << raw[0], raw[1], raw[2] / cfg.hand_vmax, raw[3] / cfg.hand_vmax, raw[4];
      return out;
    }
    case EnvId::kHandV0:
    case EnvId::kHandV1:
    case EnvId::kHandV2:
    case EnvId::kHandWallV0:
    case EnvId::kHandWallV1:
    case EnvId::kHandWallV2: {
      if (raw.size() != 9) throw std::invalid_argument("hand_throw raw layout");
      VectorXd out(9);
      out << raw[0], raw[1], raw[2] / cfg.hand_vmax, raw[3] / cfg.hand_vmax,
          raw[4], raw[5], raw[6], raw[7] / cfg.ball_vmax, raw[8] / cfg.ball_vmax;
      return out;
    }
    case EnvId::kRobotReach: {
      if (raw.size() != 9) throw std::invalid_argument("robot_reach raw layout");
      VectorXd out(11);
      out << std::cos(raw[0]), std::sin(raw[0]), std::cos(raw[1]),
          std::sin(raw[1]), raw[2], raw[3], raw[4] / cfg.joint_vmax,
          raw[5] / cfg.joint_vmax, raw[6] / cfg.tip_vmax, raw[7] / cfg.tip_vmax,
          raw[8];
      return out;
    }
    case EnvId::kRobotV0:
    case EnvId::kRobotV1:
    case EnvId::kRobotV2: {
      if (raw.size() != 13) throw std::invalid_argument("robot_throw raw layout");
      VectorXd out(15);
      out << std::cos(raw[0]), std::sin(raw[0]), std::cos(raw[1]),
          std::sin(raw[1]), raw[2], raw[3], raw[4] / cfg.joint_vmax,
          raw[5] / cfg.joint_vmax, raw[6] / cfg.tip_vmax, raw[7] / cfg.tip_vmax,
          raw[8], raw[9], raw[10], raw[11] / cfg.ball_vmax,
          raw[12] / cfg.ball_vmax;
      return out;
    }
    case EnvId::kStickyLine: {
      if (raw.size() != 2) throw std::invalid_argument("sticky_line raw layout");
      VectorXd out(2);
      out << raw[0], raw[1] / cfg.hand_vmax;
      return out;
    }
  }
  throw std::invalid_argument("unknown env id");
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.max_steps < 1 || cfg_.steps_per_second <= 0.0 ||
      cfg_.resolved_threshold() <= 0.0) {
    throw std::invalid_argument("invalid environment configuration");
  }
}

Env::Family Env::family() const {
  switch (cfg_.env_id) {
    case EnvId::kRobotReach:
    case EnvId::kRobotV0:
    case EnvId::kRobotV1:
    case EnvId::kRobotV2:
      return Family::kRobot;
    case EnvId::kStickyLine:
      return Family::kSticky;
    default:
      return Family::kHand;
  }
}

bool Env::is_reach() const {
  return cfg_.env_id == EnvId::kHandReach || cfg_.env_id == EnvId::kRobotReach;
}

bool Env::has_wall() const {
  return cfg_.env_id == EnvId::kHandWallV0 || cfg_.env_id == EnvId::kHandWallV1 ||
         cfg_.env_id == EnvId::kHandWallV2;
}

Rect Env::hand_bounds() const {
  if (cfg_.hand_left_half) return {0.02, 0.02, 0.48, 0.98};
  return {0.52, 0.02, 0.98, 0.98};
}

Rect Env::goal_region() const {
  switch (cfg_.env_id) {
    case EnvId::kHandReach: {
      Rect hb = hand_bounds();
      return {hb.x0, 0.0, hb.x1, 0.04};
    }
    case EnvId::kHandV0:
    case EnvId::kHandV1:
    case EnvId::kHandV2:
      return {0.55, 0.05, 0.95, 0.45};
    case EnvId::kHandWallV0:
    case EnvId::kHandWallV1:
    case EnvId::kHandWallV2:
      return {cfg_.wall.x + 0.07, 0.05, 0.95, 0.40};
    case EnvId::kRobotReach: {
      const double reach = manip_.link_lengths.sum();
      const double x_span = reach * std::cos(75.0 * kDeg);
      return {manip_.base.x() - x_span, 0.93, manip_.base.x() + x_span, 0.98};
    }
    case EnvId::kRobotV0:
    case EnvId::kRobotV1:
    case EnvId::kRobotV2:
      return {0.60, 0.05, 0.95, 0.45};
    case EnvId::kStickyLine:
      return {0.05, 0.45, 0.95, 0.55};
  }
  return {};
}

Vector2d Env::achieved_goal() const {
  switch (family()) {
    case Family::kHand:
      if (is_reach()) return hand_.pos;
      return ball_.pos;
    case Family::kRobot: {
      if (is_reach()) {
        auto [tip, tip_vel] = forward_kinematics(manip_.theta, manip_.theta_dot,
                                                 manip_.base, manip_.link_lengths);
        (void)tip_vel;
        return tip;
      }
      return ball_.pos;
    }
    case Family::kSticky:
      return {sticky_pos_, 0.5};
  }
  return {0.0, 0.0};
}

VectorXd Env::raw_observation() const {
  switch (family()) {
    case Family::kHand: {
      if (is_reach()) {
        VectorXd raw(5);
        raw << hand_.pos.x(), hand_.pos.y(), hand_.vel.x(), hand_.vel.y(),
            hand_.is_close ? 1.0 : 0.0;
        return raw;
      }
      VectorXd raw(9);
      raw << hand_.pos.x(), hand_.pos.y(), hand_.vel.x(), hand_.vel.y(),
          hand_.is_close ? 1.0 : 0.0, ball_.pos.x(), ball_.pos.y(),
          ball_.vel.x(), ball_.vel.y();
      return raw;
    }
    case Family::kRobot: {
      auto [tip, tip_vel] = forward_kinematics(manip_.theta, manip_.theta_dot,
                                               manip_.base, manip_.link_lengths);
      if (is_reach()) {
        VectorXd raw(9);
        raw << manip_.theta.x(), manip_.theta.y(), tip.x(), tip.y(),
            manip_.theta_dot.x(), manip_.theta_dot.y(), tip_vel.x(),
            tip_vel.y(), manip_.is_close ? 1.0 : 0.0;
        return raw;
      }
      VectorXd raw(13);
      raw << manip_.theta.x(), manip_.theta.y(), tip.x(), tip.y(),
          manip_.theta_dot.x(), manip_.theta_dot.y(), tip_vel.x(), tip_vel.y(),
          manip_.is_close ? 1.0 : 0.0, ball_.pos.x(), ball_.pos.y(),
          ball_.vel.x(), ball_.vel.y();
      return raw;
    }
    case Family::kSticky: {
      VectorXd raw(2);
      raw << sticky_pos_, sticky_vel_;
      return raw;
    }
  }
  return {};
}

GoalObservation Env::observe() const {
  return {scale_observation(raw_observation(), cfg_.env_id, cfg_),
          achieved_goal(), goal_};
}

int Env::observation_dim() const {
  switch (cfg_.env_id) {
    case EnvId::kHandReach: return 5;
    case EnvId::kRobotReach: return 11;
    case EnvId::kStickyLine: return 2;
    case EnvId::kRobotV0:
    case EnvId::kRobotV1:
    case EnvId::kRobotV2: return 15;
    default: return 9;
  }
}

int Env::action_dim() const {
  return family() == Family::kSticky ? 2 : 3;
}

VectorXd Env::action_low() const {
  VectorXd low(action_dim());
  switch (family()) {
    case Family::kHand:
      low << -cfg_.hand_vmax, -cfg_.hand_vmax, -1.0;
      break;
    case Family::kRobot:
      low << -cfg_.joint_vmax, -cfg_.joint_vmax, -1.0;
      break;
    case Family::kSticky:
      low << -cfg_.hand_vmax, -1.0;
      break;
  }
  return low;
}

VectorXd Env::action_high() const { return -action_low(); }

VectorXd Env::action_sample(RngStream& rng) const {
  VectorXd low = action_low();
  VectorXd high = action_high();
  VectorXd a(low.size());
  for (int i = 0; i < a.size(); ++i) a[i] = rng.uniform(low[i], high[i]);
  return a;
}

GoalObservation Env::reset(RngStream& rng) {
  step_count_ = 0;
  done_ = false;
  ball_ = BallState{};
  const double r = cfg_.ball_radius;
  switch (family()) {
    case Family::kHand: {
      Rect hb = hand_bounds();
      hand_ = HandState{};
      hand_.pos = {rng.uniform(hb.x0, hb.x1), rng.uniform(hb.y0, hb.y1)};
      bool in_gripper = false;
      switch (cfg_.env_id) {
        case EnvId::kHandV0:
        case EnvId::kHandWallV0:
          in_gripper = true;
          break;
        case EnvId::kHandV2:
        case EnvId::kHandWallV2:
          in_gripper = rng.uniform() < cfg_.in_gripper_prob;
          break;
        default:
          break;
      }
      if (in_gripper) {
        hand_.is_close = true;
        hand_.holding = true;
        ball_.is_held = true;
        ball_.pos = hand_.pos;
      } else {
        ball_.pos = {rng.uniform(hb.x0, hb.x1), r};
        ball_.on_ground = true;
      }
      if (is_reach()) {
        goal_ = ball_.pos;
      } else {
        Rect gr = goal_region();
        goal_ = {rng.uniform(gr.x0, gr.x1), rng.uniform(gr.y0, gr.y1)};
      }
      break;
    }
    case Family::kRobot: {
      manip_ = ManipulatorState{};
      manip_.theta = {rng.uniform(M_PI, 2.0 * M_PI), rng.uniform(M_PI, 2.0 * M_PI)};
      bool in_gripper = false;
      if (cfg_.env_id == EnvId::kRobotV0) in_gripper = true;
      if (cfg_.env_id == EnvId::kRobotV2) {
        in_gripper = rng.uniform() < cfg_.in_gripper_prob;
      }
      if (in_gripper) {
        auto [tip, tip_vel] = forward_kinematics(manip_.theta, manip_.theta_dot,
                                                 manip_.base, manip_.link_lengths);
        (void)tip_vel;
        manip_.is_close = true;
        manip_.holding = true;
        ball_.is_held = true;
        ball_.pos = clamp_to_screen(tip, r);
      } else {
        // Stationary in the air within a sub-area of the workspace; motion
        // starts only after the first grab.
        const double reach = manip_.link_lengths.sum();
        const double angle = rng.uniform(75.0 * kDeg, 105.0 * kDeg);
        const double radius = rng.uniform(0.75 * reach, reach);
        ball_.pos = clamp_to_screen(
            manip_.base + radius * Vector2d{std::cos(angle), std::sin(angle)}, r);
        ball_.dormant = true;
      }
      if (is_reach()) {
        goal_ = ball_.pos;
      } else {
        Rect gr = goal_region();
        goal_ = {rng.uniform(gr.x0, gr.x1), rng.uniform(gr.y0, gr.y1)};
      }
      break;
    }
    case Family::kSticky: {
      sticky_pos_ = rng.uniform(0.05, 0.95);
      sticky_vel_ = 0.0;
      goal_ = {rng.uniform(0.05, 0.95), 0.5};
      break;
    }
  }
  return observe();
}

Env::StepResult Env::step(const VectorXd& action) {
  if (done_) throw std::logic_error("step() on a finished episode; call reset()");
  if (action.size() != action_dim()) {
    throw std::invalid_argument("wrong action dimension");
  }
  VectorXd low = action_low();
  VectorXd high = action_high();
  VectorXd a = action.cwiseMax(low).cwiseMin(high);
  const double dt = cfg_.dt();
  WorldGeom geom{cfg_.gravity, cfg_.restitution, cfg_.friction, cfg_.ball_radius,
                 cfg_.settle_speed,
                 has_wall() ? std::optional<WallSpec>(cfg_.wall) : std::nullopt};
  bool sticky_terminated = false;
  switch (family()) {
    case Family::kHand: {
      const bool close_cmd = a[2] > 0.0;
      if (close_cmd && !hand_.is_close) {
        if (!ball_.is_held && try_grab(hand_.pos, ball_, cfg_.ball_radius)) {
          hand_.holding = true;
          ball_.is_held = true;
          ball_.on_ground = false;
          ball_.dormant = false;
          ball_.pos = hand_.pos;
        }
      } else if (!close_cmd && hand_.is_close && hand_.holding) {
        hand_.holding = false;
        ball_.is_held = false;
        ball_.vel = hand_.vel;
      }
      hand_.is_close = close_cmd;
      Rect hb = hand_bounds();
      Vector2d old = hand_.pos;
      hand_.pos = {clamp(old.x() + a[0] * dt, hb.x0, hb.x1),
                   clamp(old.y() + a[1] * dt, hb.y0, hb.y1)};
      hand_.vel = (hand_.pos - old) / dt;
      if (hand_.holding) {
        ball_.pos = hand_.pos;
        ball_.vel = hand_.vel;
      } else {
        ball_ = ball_integrate(ball_, dt, geom);
      }
      break;
    }
    case Family::kRobot: {
      const bool close_cmd = a[2] > 0.0;
      auto [tip_before, v0] = forward_kinematics(manip_.theta, manip_.theta_dot,
                                                 manip_.base, manip_.link_lengths);
      (void)v0;
      if (close_cmd && !manip_.is_close) {
        if (!ball_.is_held && try_grab(tip_before, ball_, cfg_.ball_radius)) {
          manip_.holding = true;
          ball_.is_held = true;
          ball_.on_ground = false;
          ball_.dormant = false;
        }
      } else if (!close_cmd && manip_.is_close && manip_.holding) {
        auto [tip, tip_vel] = forward_kinematics(manip_.theta, manip_.theta_dot,
                                                 manip_.base, manip_.link_lengths);
        (void)tip;
        manip_.holding = false;
        ball_.is_held = false;
        ball_.vel = tip_vel;
      }
      manip_.is_close = close_cmd;
      manip_.theta_dot = {a[0], a[1]};
      manip_.theta += manip_.theta_dot * dt;
      if (manip_.holding) {
        auto [tip, tip_vel] = forward_kinematics(manip_.theta, manip_.theta_dot,
                                                 manip_.base, manip_.link_lengths);
        ball_.pos = clamp_to_screen(tip, cfg_.ball_radius);
        ball_.vel = tip_vel;
      } else {
        ball_ = ball_integrate(ball_, dt, geom);
      }
      break;
    }
    case Family::kSticky: {
      if (a[1] > 0.0) {
        // Terminate in place: no state change, episode ends.
        sticky_terminated = true;
        sticky_vel_ = 0.0;
      } else {
        double old = sticky_pos_;
        sticky_pos_ = clamp(old + a[0] * dt, 0.0, 1.0);
        sticky_vel_ = (sticky_pos_ - old) / dt;
      }
      break;
    }
  }
  ++step_count_;
  StepResult result;
  result.reward = compute_reward(achieved_goal(), goal_, threshold());
  result.success = result.reward == 0.0;
  done_ = result.success || step_count_ >= cfg_.max_steps || sticky_terminated;
  result.done = done_;
  result.obs = observe();
  return result;
}

void Env::write_ppm(const std::filesystem::path& path) const {
  constexpr int kSide = 200;
  std::vector<unsigned char> px(kSide * kSide * 3, 255);
  auto put = [&](int ix, int iy, unsigned char r, unsigned char g,
                 unsigned char b) {
    if (ix < 0 || ix >= kSide || iy < 0 || iy >= kSide) return;
    const int row = kSide - 1 - iy;  // y up
    const int o = (row * kSide + ix) * 3;
    px[o] = r;
    px[o + 1] = g;
    px[o + 2] = b;
  };
  auto disk = [&](const Vector2d& c, double radius, unsigned char r,
                  unsigned char g, unsigned char b) {
    const int n = int(radius * kSide) + 1;
    const int cx = int(c.x() * kSide), cy = int(c.y() * kSide);
    for (int dy = -n; dy <= n; ++dy) {
      for (int dx = -n; dx <= n; ++dx) {
        if (dx * dx + dy * dy <= n * n) put(cx + dx, cy + dy, r, g, b);
      }
    }
  };
  auto line = [&](Vector2d a, Vector2d b) {
    for (int i = 0; i <= 100; ++i) {
      Vector2d p = a + (b - a) * (i / 100.0);
      put(int(p.x() * kSide), int(p.y() * kSide), 40, 40, 40);
    }
  };
  disk(goal_, 0.02, 10, 10, 10);
  if (family() == Family::kHand) {
    disk(hand_.pos, 0.02, 200, 60, 60);
    if (has_wall()) {
      for (double y = 0.0; y < cfg_.wall.height; y += 0.005) {
        line({cfg_.wall.x, y}, {cfg_.wall.x, std::min(y + 0.005, cfg_.wall.height)});
      }
    }
  }
  if (family() == Family::kRobot) {
    Vector2d joint = manip_.base;
    double angle = 0.0;
    for (int i = 0; i < 2; ++i) {
      angle += manip_.theta[i];
      Vector2d next = joint + manip_.link_lengths[i] *
                                  Vector2d{std::cos(angle), std::sin(angle)};
      line(joint, next);
      joint = next;
    }
    disk(joint, 0.012, 200, 60, 60);
  }
  if (family() == Family::kSticky) {
    disk({sticky_pos_, 0.5}, 0.015, 60, 60, 200);
  } else {
    disk(ball_.pos, cfg_.ball_radius, 230, 140, 30);
  }
  std::ofstream out(path, std::ios::binary);
  out << "P6\n" << kSide << " " << kSide << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), std::streamsize(px.size()));
}

}  // namespace herlab
