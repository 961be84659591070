#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace cle {

// Capacity-bounded store of (payload, label). When full, eviction removes a
// uniformly random item from the most represented class (ties between classes
// broken uniformly at random). Slots stay dense, so inserts are O(1).
template <typename Payload>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return labels_.size(); }
  bool full() const { return size() >= capacity_; }

  int label(std::size_t slot) const { return labels_[slot]; }
  const Payload& payload(std::size_t slot) const { return payloads_[slot]; }

  std::size_t class_count(int label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= slots_by_class_.size()) return 0;
    return slots_by_class_[static_cast<std::size_t>(label)].size();
  }
  std::size_t num_label_slots() const { return slots_by_class_.size(); }

  void insert(Payload payload, int label, std::mt19937_64& rng) {
    if (capacity_ == 0) throw std::logic_error("replay buffer: insert with zero capacity");
    if (label < 0) throw std::invalid_argument("replay buffer: negative label");
    if (static_cast<std::size_t>(label) >= slots_by_class_.size())
      slots_by_class_.resize(static_cast<std::size_t>(label) + 1);

    if (full()) {
      const int victim_class = pick_most_represented(rng);
      auto& slots = slots_by_class_[static_cast<std::size_t>(victim_class)];
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, slots.size() - 1)(rng);
      const std::size_t slot = slots[pick];
      slots[pick] = slots.back();
      slots.pop_back();
      payloads_[slot] = std::move(payload);
      labels_[slot] = label;
      slots_by_class_[static_cast<std::size_t>(label)].push_back(slot);
      last_evicted_class_ = victim_class;
    } else {
      payloads_.push_back(std::move(payload));
      labels_.push_back(label);
      slots_by_class_[static_cast<std::size_t>(label)].push_back(size() - 1);
      last_evicted_class_ = -1;
    }
  }

  // Uniform sample of r distinct slots (Floyd), in pick order.
  std::vector<std::size_t> sample_without_replacement(std::size_t r, std::mt19937_64& rng) const {
    const std::size_t n = size();
    if (r > n) r = n;
    std::vector<std::size_t> picks;
    picks.reserve(r);
    std::vector<char> taken(n, 0);
    for (std::size_t i = n - r; i < n; ++i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i)(rng);
      if (taken[j]) {
        picks.push_back(i);
        taken[i] = 1;
      } else {
        picks.push_back(j);
        taken[j] = 1;
      }
    }
    return picks;
  }

  // Class evicted by the most recent insert, or -1 if nothing was evicted.
  int last_evicted_class() const { return last_evicted_class_; }

 private:
  int pick_most_represented(std::mt19937_64& rng) const {
    std::size_t best = 0;
    std::vector<int> tied;
    for (std::size_t c = 0; c < slots_by_class_.size(); ++c) {
      const std::size_t n = slots_by_class_[c].size();
      if (n > best) {
        best = n;
        tied.clear();
      }
      if (n == best && n > 0) tied.push_back(static_cast<int>(c));
    }
    if (tied.size() == 1) return tied.front();
    return tied[std::uniform_int_distribution<std::size_t>(0, tied.size() - 1)(rng)];
  }

  std::size_t capacity_;
  std::vector<Payload> payloads_;
  std::vector<int> labels_;
  std::vector<std::vector<std::size_t>> slots_by_class_;
  int last_evicted_class_ = -1;
};

}  // namespace cle
