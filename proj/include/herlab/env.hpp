#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "herlab/rng.hpp"
#include "herlab/types.hpp"

namespace herlab {

enum class EnvId {
  kHandReach,
  kHandV0,
  kHandV1,
  kHandV2,
  kHandWallV0,
  kHandWallV1,
  kHandWallV2,
  kRobotReach,
  kRobotV0,
  kRobotV1,
  kRobotV2,
  kStickyLine,
};

std::string to_string(EnvId id);
EnvId env_id_from_string(const std::string& s);

struct WallSpec {
  double x = 0.55;        // center of the slab
  double height = 0.45;   // from the floor
  double thickness = 0.02;
};

struct EnvConfig {
  EnvId env_id = EnvId::kHandReach;
  int max_steps = 50;
  double steps_per_second = 20.0;
  double reward_threshold = 0.0;  // 0 -> per-env default (reach 0.02, throw 0.05)
  int screen_px = 500;
  double scale = 500.0;  // pixels per screen unit
  bool hand_left_half = true;
  WallSpec wall;
  double ball_radius = 0.02;
  double gravity = 10.0;
  double restitution = 0.7;
  double friction = 0.1;
  double ball_mass = 3.0;  // recorded; the kinematic model never uses force
  double hand_vmax = 1.0;
  double joint_vmax = M_PI;
  double ball_vmax = 2.0;
  double tip_vmax = 4.0;
  double settle_speed = 0.1;  // below this impact speed the ball rests
  double in_gripper_prob = 0.5;  // v2 variants

  double resolved_threshold() const;
  double dt() const { return 1.0 / steps_per_second; }
};

struct BounceCounts {
  long floor = 0;
  long border = 0;
  long obstacle = 0;
  long total() const { return floor + border + obstacle; }
};

struct BallState {
  Vector2d pos{0.0, 0.0};
  Vector2d vel{0.0, 0.0};
  bool is_held = false;
  bool on_ground = false;
  bool dormant = false;  // robot-style ball: motionless until first grabbed
  BounceCounts bounce_count;
};

struct HandState {
  Vector2d pos{0.0, 0.0};
  Vector2d vel{0.0, 0.0};
  bool is_close = false;
  bool holding = false;
};

struct ManipulatorState {
  Vector2d theta{0.0, 0.0};
  Vector2d theta_dot{0.0, 0.0};
  Vector2d base{0.33, 0.5};
  Vector2d link_lengths{0.3, 0.3};
  bool is_close = false;
  bool holding = false;
};

struct WorldGeom {
  double gravity = 10.0;
  double restitution = 0.7;
  double friction = 0.1;
  double radius = 0.02;
  double settle_speed = 0.1;
  std::optional<WallSpec> wall;
};

// One explicit semi-implicit integration step for an unheld ball.
BallState ball_integrate(BallState ball, double dt, const WorldGeom& geom);

// Tip position and velocity of a planar chain with cumulative joint angles.
std::pair<Vector2d, Vector2d> forward_kinematics(const VectorXd& theta,
                                                 const VectorXd& theta_dot,
                                                 const Vector2d& base,
                                                 const VectorXd& link_lengths);

// Gripper reference point overlaps the ball's bounding circle.
bool try_grab(const Vector2d& gripper, const BallState& ball, double grab_tol);

// Table layout -> network layout: positions into [0,1], velocities divided by
// the configured maxima, each angle replaced by its (cos, sin) pair.
VectorXd scale_observation(const VectorXd& raw, EnvId id, const EnvConfig& cfg);

class Env {
 public:
  explicit Env(EnvConfig cfg);

  GoalObservation reset(RngStream& rng);

  struct StepResult {
    GoalObservation obs;
    double reward = -1.0;
    bool done = false;
    bool success = false;
  };
  StepResult step(const VectorXd& action);

  VectorXd action_sample(RngStream& rng) const;

  int observation_dim() const;  // scaled width
  int action_dim() const;
  VectorXd action_low() const;
  VectorXd action_high() const;

  const EnvConfig& config() const { return cfg_; }
  double threshold() const { return cfg_.resolved_threshold(); }
  Rect goal_region() const;
  int step_count() const { return step_count_; }
  bool done() const { return done_; }

  const BallState& ball() const { return ball_; }
  const HandState& hand() const { return hand_; }
  const ManipulatorState& manipulator() const { return manip_; }
  const Vector2d& goal() const { return goal_; }
  Vector2d achieved_goal() const;

  GoalObservation observe() const;

  // Plain portable-pixmap debug frame.
  void write_ppm(const std::filesystem::path& path) const;

 private:
  enum class Family { kHand, kRobot, kSticky };

  Family family() const;
  bool is_reach() const;
  bool has_wall() const;
  VectorXd raw_observation() const;
  Rect hand_bounds() const;

  EnvConfig cfg_;
  HandState hand_;
  ManipulatorState manip_;
  BallState ball_;
  Vector2d goal_{0.0, 0.0};
  double sticky_pos_ = 0.5;
  double sticky_vel_ = 0.0;
  int step_count_ = 0;
  bool done_ = true;
};

}  // namespace herlab
