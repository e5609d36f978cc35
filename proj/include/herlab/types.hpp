#pragma once

#include <Eigen/Dense>

namespace herlab {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

// Three-part multi-goal observation record emitted by every environment and
// curriculum sub-task.
struct GoalObservation {
  VectorXd observation;
  Vector2d achieved_goal;
  Vector2d desired_goal;
};

// Axis-aligned rectangle in screen units.
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  Vector2d center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool contains(const Vector2d& p) const {
    return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
  }
};

// Sparse binary reward: 0 iff the goal is achieved (strict inequality),
// -1 otherwise. Shared by environments and hindsight relabeling.
inline double compute_reward(const Vector2d& achieved, const Vector2d& desired,
                             double threshold) {
  return (achieved - desired).norm() < threshold ? 0.0 : -1.0;
}

// One goal-conditioned off-policy experience tuple.
struct Transition {
  VectorXd state;
  Vector2d goal;
  VectorXd action;
  double reward = -1.0;
  VectorXd next_state;
  bool success_terminal = false;
  bool is_virtual = false;
};

}  // namespace herlab
