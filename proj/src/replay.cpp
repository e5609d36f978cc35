#include "herlab/replay.hpp"

#include <cmath>
#include <stdexcept>

namespace herlab {
namespace {
constexpr std::uint64_t kEmptySlot = ~std::uint64_t{0};
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double alpha, double epsilon)
    : capacity_(capacity), alpha_(alpha), epsilon_(epsilon) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be > 0");
  if (alpha_ < 0.0 || epsilon_ <= 0.0) {
    throw std::invalid_argument("invalid replay priority parameters");
  }
  leaf_base_ = 1;
  while (leaf_base_ < capacity_) leaf_base_ <<= 1;
  tree_.assign(2 * leaf_base_, 0.0);
  data_.resize(capacity_);
  ids_.assign(capacity_, kEmptySlot);
}

void ReplayBuffer::set_leaf(std::size_t slot, double value) {
  std::size_t node = leaf_base_ + slot;
  tree_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1) {
    tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
  }
}

std::size_t ReplayBuffer::find_prefix(double mass) const {
  std::size_t node = 1;
  while (node < leaf_base_) {
    const double left = tree_[2 * node];
    if (mass < left) {
      node = 2 * node;
    } else {
      mass -= left;
      node = 2 * node + 1;
    }
  }
  return node - leaf_base_;
}

std::uint64_t ReplayBuffer::add(Transition t) {
  const std::uint64_t id = next_id_++;
  const std::size_t slot = slot_of(id);
  data_[slot] = std::move(t);
  ids_[slot] = id;
  if (size_ < capacity_) ++size_;
  set_leaf(slot, std::pow(max_raw_priority_, alpha_));
  return id;
}

ReplayBuffer::Sample ReplayBuffer::sample(int batch_size, RngStream& rng) const {
  if (size_ == 0) throw std::logic_error("sample() from an empty replay buffer");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  const double total = tree_[1];
  Sample out;
  out.items.reserve(batch_size);
  out.ids.reserve(batch_size);
  out.probabilities.reserve(batch_size);
  for (int k = 0; k < batch_size; ++k) {
    const std::size_t slot = find_prefix(rng.uniform() * total);
    out.items.push_back(&data_[slot]);
    out.ids.push_back(ids_[slot]);
    out.probabilities.push_back(tree_[leaf_base_ + slot] / total);
  }
  return out;
}

void ReplayBuffer::update_priorities(std::span<const std::uint64_t> ids,
                                     std::span<const double> td_errors) {
  if (ids.size() != td_errors.size()) {
    throw std::invalid_argument("ids/td_errors length mismatch");
  }
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const std::size_t slot = slot_of(ids[k]);
    if (ids_[slot] != ids[k]) {
      ++stale_updates_;  // the ring evicted this transition already
      continue;
    }
    const double raw = std::abs(td_errors[k]) + epsilon_;
    max_raw_priority_ = std::max(max_raw_priority_, raw);
    set_leaf(slot, std::pow(raw, alpha_));
  }
}

void ReplayBuffer::clear() {
  tree_.assign(tree_.size(), 0.0);
  ids_.assign(capacity_, kEmptySlot);
  size_ = 0;
  max_raw_priority_ = 1.0;
  // next_id_ keeps growing so updates queued before the clear stay stale.
}

const Transition& ReplayBuffer::transition_by_id(std::uint64_t id) const {
  const std::size_t slot = slot_of(id);
  if (ids_[slot] != id) {
    throw std::out_of_range("transition id no longer resident");
  }
  return data_[slot];
}

}  // namespace herlab
