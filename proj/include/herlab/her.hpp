#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "herlab/rng.hpp"
#include "herlab/types.hpp"

namespace herlab {

// Discretized virtual-goal bookkeeping over the unit screen. q_star is the
// kernel-smoothed target distribution concentrated on the real-goal support;
// q is the empirical distribution of virtual goals recorded so far.
class VirtualGoalGrid {
 public:
  VirtualGoalGrid(Rect goal_region, double sigma, double sigma_final,
                  int rows = 20, int cols = 20);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double sigma() const { return sigma_; }
  double sigma_final() const { return sigma_final_; }
  long count() const { return count_; }
  const Rect& goal_region() const { return region_; }

  int cell_of(const Vector2d& g) const;  // row-major flat index
  Vector2d cell_center(int cell) const;

  const VectorXd& q_star() const { return q_star_; }
  VectorXd q() const;  // per-cell counts / max(count, 1)

  void record(const Vector2d& g);
  void decay_sigma();  // sigma <- max(0.9 sigma, sigma_final), q_star rebuilt
  void reset_counts();

  void write_csv(const std::filesystem::path& q_path,
                 const std::filesystem::path& q_star_path) const;

 private:
  void rebuild_target();

  Rect region_;
  double sigma_;
  double sigma_final_;
  int rows_;
  int cols_;
  VectorXd q_star_;
  VectorXd counts_;
  long count_ = 0;
};

// Integral of the isotropic Gaussian kernel centred at g over the rectangle,
// evaluated in closed form as the product of two error-function factors.
double kernel_score(const Vector2d& g, const Rect& region, double sigma);

enum class HerStrategy { kFuture, kIbs };
std::string to_string(HerStrategy s);
HerStrategy her_strategy_from_string(const std::string& s);

struct HerConfig {
  int k = 4;                    // virtual goals per transition
  HerStrategy strategy = HerStrategy::kFuture;
  bool filter_on = false;
  double weight_floor = 0.002;
};

// Selection probabilities for candidate virtual goals: per candidate
// w = max(q_star[cell] - q[cell], weight_floor), returned normalized.
VectorXd vg_weights(const VirtualGoalGrid& grid,
                    const std::vector<Vector2d>& candidates);

// keep = the pre-transition state does NOT already satisfy g_virtual.
bool filter_check(const Vector2d& achieved_prev, const Vector2d& g_virtual,
                  double threshold);

struct EpisodeStep {
  VectorXd state;
  VectorXd action;
  VectorXd next_state;
  Vector2d achieved_prev;  // achieved goal extracted from state
  Vector2d achieved_next;  // achieved goal extracted from next_state
  Vector2d desired;        // real goal as seen at this step
};

struct EpisodeTrace {
  std::vector<EpisodeStep> steps;
};

// Future-strategy relabeling. Real-goal transitions come first, unfiltered;
// each step then contributes up to k virtual transitions drawn with
// replacement from its strictly-future achieved goals. grid must be present
// iff strategy == ibs; when present, every stored virtual goal is recorded
// into it (future strategy also records when a grid is supplied, feeding the
// KL diagnostic without affecting selection).
std::vector<Transition> relabel_episode(const EpisodeTrace& trace,
                                        const HerConfig& cfg,
                                        VirtualGoalGrid* grid,
                                        double threshold, RngStream& rng);

// D(q ‖ q_star) with 1e-9 additive smoothing and renormalization on both.
double kl_distance(const VectorXd& q, const VectorXd& q_star);

}  // namespace herlab
