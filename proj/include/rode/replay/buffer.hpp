#pragma once

#include <deque>
#include <stdexcept>
#include <vector>

#include "rode/core/rng.hpp"
#include "rode/replay/episode.hpp"

namespace rode {

/// FIFO episodic replay buffer: whole episodes in, uniform batches (with
/// replacement) out. Stored episodes are never mutated.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity, int episode_limit)
      : capacity_(capacity), episode_limit_(episode_limit) {
    if (capacity <= 0) throw std::runtime_error("ReplayBuffer: capacity must be positive");
  }

  void push_episode(Episode episode) {
    if (episode.length <= 0)
      throw std::runtime_error("ReplayBuffer: refusing empty episode");
    if (episode.length > episode_limit_)
      throw std::runtime_error("ReplayBuffer: episode length " +
                               std::to_string(episode.length) + " exceeds limit " +
                               std::to_string(episode_limit_));
    episodes_.push_back(std::move(episode));
    if (static_cast<int>(episodes_.size()) > capacity_) episodes_.pop_front();
  }

  int size() const { return static_cast<int>(episodes_.size()); }
  bool ready(int batch_size) const { return size() >= batch_size; }

  const Episode& episode(int i) const { return episodes_.at(static_cast<std::size_t>(i)); }

  /// Uniform with replacement. Not ready => runtime_error; callers gate on
  /// ready() and skip the update.
  EpisodeBatch sample(int batch_size, Rng& rng) const {
    if (!ready(batch_size))
      throw std::runtime_error("ReplayBuffer: not ready (" + std::to_string(size()) + " < " +
                               std::to_string(batch_size) + " episodes)");
    std::vector<const Episode*> picks;
    picks.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i)
      picks.push_back(&episodes_[static_cast<std::size_t>(rng.next_int(size()))]);
    return pack_episodes(picks);
  }

 private:
  std::deque<Episode> episodes_;
  int capacity_;
  int episode_limit_;
};

}  // namespace rode
