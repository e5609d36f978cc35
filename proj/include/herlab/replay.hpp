#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "herlab/rng.hpp"
#include "herlab/types.hpp"

namespace herlab {

// Proportional prioritized replay over a fixed-capacity ring. Priorities live
// in a binary sum tree so draws and updates are O(log capacity). Every stored
// transition gets a monotonically increasing id; a priority update whose id no
// longer occupies its slot (the ring has overwritten it) is skipped silently
// and counted.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000, double alpha = 0.6,
                        double epsilon = 0.01);

  std::uint64_t add(Transition t);

  struct Sample {
    std::vector<const Transition*> items;
    std::vector<std::uint64_t> ids;
    std::vector<double> probabilities;  // P(i) under the current tree
  };
  Sample sample(int batch_size, RngStream& rng) const;

  void update_priorities(std::span<const std::uint64_t> ids,
                         std::span<const double> td_errors);

  void clear();

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  double alpha() const { return alpha_; }
  double epsilon() const { return epsilon_; }
  double total_mass() const { return tree_[1]; }
  std::uint64_t stale_update_count() const { return stale_updates_; }

  const Transition& transition_by_id(std::uint64_t id) const;

 private:
  std::size_t slot_of(std::uint64_t id) const {
    return static_cast<std::size_t>(id % capacity_);
  }
  void set_leaf(std::size_t slot, double value);
  std::size_t find_prefix(double mass) const;

  std::size_t capacity_;
  double alpha_;
  double epsilon_;
  std::size_t leaf_base_;          // power of two >= capacity
  std::vector<double> tree_;       // 1-indexed, root at 1
  std::vector<Transition> data_;
  std::vector<std::uint64_t> ids_;
  std::size_t size_ = 0;
  std::uint64_t next_id_ = 0;
  double max_raw_priority_ = 1.0;  // new samples enter at the running maximum
  std::uint64_t stale_updates_ = 0;
};

}  // namespace herlab
