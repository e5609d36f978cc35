#include "herlab/her.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace herlab {
namespace {

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

int pick_weighted(const VectorXd& p, RngStream& rng) {
  double u = rng.uniform();
  for (int i = 0; i < p.size(); ++i) {
    u -= p[i];
    if (u < 0.0) return i;
  }
  return int(p.size()) - 1;
}

}  // namespace

double kernel_score(const Vector2d& g, const Rect& region, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("kernel sigma must be > 0");
  const double s = sigma * std::numbers::sqrt2;
  const double fx =
      std::erf((region.x1 - g.x()) / s) - std::erf((region.x0 - g.x()) / s);
  const double fy =
      std::erf((region.y1 - g.y()) / s) - std::erf((region.y0 - g.y()) / s);
  return 0.5 * M_PI * sigma * sigma * fx * fy;
}

VirtualGoalGrid::VirtualGoalGrid(Rect goal_region, double sigma,
                                 double sigma_final, int rows, int cols)
    : region_(goal_region),
      sigma_(sigma),
      sigma_final_(sigma_final),
      rows_(rows),
      cols_(cols) {
  if (rows_ < 1 || cols_ < 1) throw std::invalid_argument("grid shape");
  if (sigma_final_ <= 0.0 || sigma_ < sigma_final_) {
    throw std::invalid_argument("require sigma >= sigma_final > 0");
  }
  if (region_.area() <= 0.0) {
    throw std::invalid_argument("degenerate goal region");
  }
  counts_ = VectorXd::Zero(rows_ * cols_);
  rebuild_target();
}

int VirtualGoalGrid::cell_of(const Vector2d& g) const {
  const int col = std::min(int(clamp01(g.x()) * cols_), cols_ - 1);
  const int row = std::min(int(clamp01(g.y()) * rows_), rows_ - 1);
  return row * cols_ + col;
}

Vector2d VirtualGoalGrid::cell_center(int cell) const {
  const int row = cell / cols_;
  const int col = cell % cols_;
  return {(col + 0.5) / cols_, (row + 0.5) / rows_};
}

void VirtualGoalGrid::rebuild_target() {
  q_star_.resize(rows_ * cols_);
  for (int c = 0; c < q_star_.size(); ++c) {
    q_star_[c] = kernel_score(cell_center(c), region_, sigma_);
  }
  const double total = q_star_.sum();
  if (total <= 0.0) throw std::runtime_error("target grid has zero mass");
  q_star_ /= total;
}

VectorXd VirtualGoalGrid::q() const {
  return counts_ / double(std::max(count_, 1L));
}

void VirtualGoalGrid::record(const Vector2d& g) {
  counts_[cell_of(g)] += 1.0;
  ++count_;
}

void VirtualGoalGrid::decay_sigma() {
  sigma_ = std::max(0.9 * sigma_, sigma_final_);
  rebuild_target();
}

void VirtualGoalGrid::reset_counts() {
  counts_.setZero();
  count_ = 0;
}

void VirtualGoalGrid::write_csv(const std::filesystem::path& q_path,
                                const std::filesystem::path& q_star_path) const {
  auto dump = [&](const std::filesystem::path& path, const VectorXd& v) {
    std::ofstream out(path);
    char buf[32];
    for (int r = 0; r < rows_; ++r) {
      for (int c = 0; c < cols_; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[r * cols_ + c]);
        out << buf << (c + 1 == cols_ ? "\n" : ",");
      }
    }
  };
  dump(q_path, q());
  dump(q_star_path, q_star_);
}

std::string to_string(HerStrategy s) {
  return s == HerStrategy::kFuture ? "future" : "ibs";
}

HerStrategy her_strategy_from_string(const std::string& s) {
  if (s == "future") return HerStrategy::kFuture;
  if (s == "ibs") return HerStrategy::kIbs;
  throw std::invalid_argument("unknown relabel strategy: " + s);
}

VectorXd vg_weights(const VirtualGoalGrid& grid,
                    const std::vector<Vector2d>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("no candidates");
  const VectorXd q = grid.q();
  const VectorXd& q_star = grid.q_star();
  VectorXd w(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const int cell = grid.cell_of(candidates[i]);
    w[int(i)] = std::max(q_star[cell] - q[cell], 0.002);
  }
  return w / w.sum();
}

bool filter_check(const Vector2d& achieved_prev, const Vector2d& g_virtual,
                  double threshold) {
  return compute_reward(achieved_prev, g_virtual, threshold) < 0.0;
}

std::vector<Transition> relabel_episode(const EpisodeTrace& trace,
                                        const HerConfig& cfg,
                                        VirtualGoalGrid* grid,
                                        double threshold, RngStream& rng) {
  if (cfg.strategy == HerStrategy::kIbs && grid == nullptr) {
    throw std::invalid_argument("ibs relabeling requires a virtual-goal grid");
  }
  std::vector<Transition> out;
  const auto& steps = trace.steps;
  const int T = int(steps.size());
  out.reserve(std::size_t(T) * std::size_t(1 + cfg.k));
  for (int t = 0; t < T; ++t) {
    const EpisodeStep& s = steps[t];
    Transition real;
    real.state = s.state;
    real.goal = s.desired;
    real.action = s.action;
    real.next_state = s.next_state;
    real.reward = compute_reward(s.achieved_next, s.desired, threshold);
    real.success_terminal = real.reward == 0.0;
    real.is_virtual = false;
    out.push_back(std::move(real));
  }
  for (int t = 0; t < T; ++t) {
    const EpisodeStep& s = steps[t];
    std::vector<Vector2d> pool;
    pool.reserve(std::size_t(T - t - 1));
    for (int u = t + 1; u < T; ++u) pool.push_back(steps[u].achieved_next);
    if (pool.empty()) continue;
    VectorXd p;
    if (cfg.strategy == HerStrategy::kIbs) p = vg_weights(*grid, pool);
    for (int j = 0; j < cfg.k; ++j) {
      const int pick = cfg.strategy == HerStrategy::kIbs
                           ? pick_weighted(p, rng)
                           : int(rng.uniform_int(pool.size()));
      const Vector2d g = pool[std::size_t(pick)];
      if (cfg.filter_on && !filter_check(s.achieved_prev, g, threshold)) {
        continue;
      }
      Transition v;
      v.state = s.state;
      v.goal = g;
      v.action = s.action;
      v.next_state = s.next_state;
      v.reward = compute_reward(s.achieved_next, g, threshold);
      v.success_terminal = v.reward == 0.0;
      v.is_virtual = true;
      out.push_back(std::move(v));
      if (grid != nullptr) grid->record(g);
    }
  }
  return out;
}

double kl_distance(const VectorXd& q, const VectorXd& q_star) {
  if (q.size() != q_star.size()) {
    throw std::invalid_argument("distribution length mismatch");
  }
  VectorXd a = (q.array() + 1e-9).matrix();
  VectorXd b = (q_star.array() + 1e-9).matrix();
  a /= a.sum();
  b /= b.sum();
  double d = 0.0;
  for (int i = 0; i < a.size(); ++i) d += a[i] * std::log(a[i] / b[i]);
  return d;
}

}  // namespace herlab
