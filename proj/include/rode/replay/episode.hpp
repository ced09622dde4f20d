#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rode/core/tensor.hpp"

namespace rode {

/// One complete episode at primitive-timestep resolution. Slot t of obs,
/// state, avail, and role describes the situation *before* action t; slot
/// `length` holds the post-final-step situation so value targets can
/// bootstrap past an episode-limit cutoff. `terminated[t]` is set only for a
/// true terminal transition (win/loss/absorbing), not for the time cutoff.
/// `role[length]` carries the last assigned role forward for bootstrapping.
struct Episode {
  int n_agents = 0;
  int obs_dim = 0;
  int state_dim = 0;
  int action_count = 0;
  int length = 0;

  std::vector<double> obs;          // (length+1, n, obs_dim)
  std::vector<double> state;        // (length+1, state_dim)
  std::vector<std::uint8_t> avail;  // (length+1, n, action_count)
  std::vector<int> action;          // (length, n)
  std::vector<int> role;            // (length+1, n)
  std::vector<double> reward;       // (length)
  std::vector<std::uint8_t> terminated;  // (length)

  bool won = false;
};

/// Fixed-layout arrays over (batch, T+1, ...) with a prefix filled-mask;
/// every loss masks by `filled`, so padding contents are irrelevant by
/// construction (and fuzzed in tests).
struct EpisodeBatch {
  int batch = 0;
  int steps = 0;  // T = longest episode in the batch
  int n_agents = 0;
  int obs_dim = 0;
  int state_dim = 0;
  int action_count = 0;

  std::vector<double> obs;               // (B, T+1, n, obs_dim)
  std::vector<double> state;             // (B, T+1, state_dim)
  std::vector<std::uint8_t> avail;       // (B, T+1, n, action_count)
  std::vector<int> action;               // (B, T, n)
  std::vector<int> role;                 // (B, T+1, n)
  std::vector<double> reward;            // (B, T)
  std::vector<std::uint8_t> terminated;  // (B, T)
  std::vector<std::uint8_t> filled;      // (B, T)

  std::size_t obs_at(int b, int t, int agent) const {
    return ((static_cast<std::size_t>(b) * (steps + 1) + t) * n_agents + agent) * obs_dim;
  }
  std::size_t state_at(int b, int t) const {
    return (static_cast<std::size_t>(b) * (steps + 1) + t) * state_dim;
  }
  std::size_t avail_at(int b, int t, int agent) const {
    return ((static_cast<std::size_t>(b) * (steps + 1) + t) * n_agents + agent) * action_count;
  }
  std::size_t action_at(int b, int t) const {
    return (static_cast<std::size_t>(b) * steps + t) * static_cast<std::size_t>(n_agents);
  }
  std::size_t role_at(int b, int t) const {
    return (static_cast<std::size_t>(b) * (steps + 1) + t) * static_cast<std::size_t>(n_agents);
  }
  std::size_t flat_at(int b, int t) const { return static_cast<std::size_t>(b) * steps + t; }

  bool is_filled(int b, int t) const { return filled[flat_at(b, t)] != 0; }
};

/// Packs episodes into a batch sized by the longest member. Padded slots get
/// neutral values: availability all-ones (so masked-out computations stay
/// finite), everything else zero.
inline EpisodeBatch pack_episodes(const std::vector<const Episode*>& eps) {
  if (eps.empty()) throw std::runtime_error("pack_episodes: empty batch");
  EpisodeBatch b;
  const Episode& first = *eps.front();
  b.batch = static_cast<int>(eps.size());
  b.n_agents = first.n_agents;
  b.obs_dim = first.obs_dim;
  b.state_dim = first.state_dim;
  b.action_count = first.action_count;
  for (const Episode* e : eps) {
    if (e->n_agents != b.n_agents || e->obs_dim != b.obs_dim || e->state_dim != b.state_dim ||
        e->action_count != b.action_count)
      throw std::runtime_error("pack_episodes: heterogeneous episode layouts");
    b.steps = std::max(b.steps, e->length);
  }
  const int B = b.batch, T = b.steps, n = b.n_agents;
  b.obs.assign(static_cast<std::size_t>(B) * (T + 1) * n * b.obs_dim, 0.0);
  b.state.assign(static_cast<std::size_t>(B) * (T + 1) * b.state_dim, 0.0);
  b.avail.assign(static_cast<std::size_t>(B) * (T + 1) * n * b.action_count, 1);
  b.action.assign(static_cast<std::size_t>(B) * T * n, 0);
  b.role.assign(static_cast<std::size_t>(B) * (T + 1) * n, 0);
  b.reward.assign(static_cast<std::size_t>(B) * T, 0.0);
  b.terminated.assign(static_cast<std::size_t>(B) * T, 0);
  b.filled.assign(static_cast<std::size_t>(B) * T, 0);

  for (int i = 0; i < B; ++i) {
    const Episode& e = *eps[static_cast<std::size_t>(i)];
    const int L = e.length;
    for (int t = 0; t <= L; ++t) {
      std::copy(e.obs.begin() + static_cast<std::ptrdiff_t>(t) * n * b.obs_dim,
                e.obs.begin() + static_cast<std::ptrdiff_t>(t + 1) * n * b.obs_dim,
                b.obs.begin() + static_cast<std::ptrdiff_t>(b.obs_at(i, t, 0)));
      std::copy(e.state.begin() + static_cast<std::ptrdiff_t>(t) * b.state_dim,
                e.state.begin() + static_cast<std::ptrdiff_t>(t + 1) * b.state_dim,
                b.state.begin() + static_cast<std::ptrdiff_t>(b.state_at(i, t)));
      std::copy(e.avail.begin() + static_cast<std::ptrdiff_t>(t) * n * b.action_count,
                e.avail.begin() + static_cast<std::ptrdiff_t>(t + 1) * n * b.action_count,
                b.avail.begin() + static_cast<std::ptrdiff_t>(b.avail_at(i, t, 0)));
      std::copy(e.role.begin() + static_cast<std::ptrdiff_t>(t) * n,
                e.role.begin() + static_cast<std::ptrdiff_t>(t + 1) * n,
                b.role.begin() + static_cast<std::ptrdiff_t>(b.role_at(i, t)));
    }
    for (int t = 0; t < L; ++t) {
      std::copy(e.action.begin() + static_cast<std::ptrdiff_t>(t) * n,
                e.action.begin() + static_cast<std::ptrdiff_t>(t + 1) * n,
                b.action.begin() + static_cast<std::ptrdiff_t>(b.action_at(i, t)));
      b.reward[b.flat_at(i, t)] = e.reward[static_cast<std::size_t>(t)];
      b.terminated[b.flat_at(i, t)] = e.terminated[static_cast<std::size_t>(t)];
      b.filled[b.flat_at(i, t)] = 1;
    }
  }
  return b;
}

/// Per-entry episode lengths recovered from the prefix filled-mask.
inline std::vector<int> batch_lengths(const EpisodeBatch& b) {
  std::vector<int> lengths(static_cast<std::size_t>(b.batch), 0);
  for (int i = 0; i < b.batch; ++i) {
    int len = 0;
    while (len < b.steps && b.is_filled(i, len)) ++len;
    lengths[static_cast<std::size_t>(i)] = len;
  }
  return lengths;
}

/// Global states at timestep t as an untracked [B, state_dim] tensor.
inline Tensor batch_states(const EpisodeBatch& b, int t) {
  if (t < 0 || t > b.steps) throw std::runtime_error("batch_states: timestep out of range");
  std::vector<double> rows(static_cast<std::size_t>(b.batch) * b.state_dim, 0.0);
  for (int i = 0; i < b.batch; ++i)
    std::copy(b.state.begin() + static_cast<std::ptrdiff_t>(b.state_at(i, t)),
              b.state.begin() + static_cast<std::ptrdiff_t>(b.state_at(i, t)) + b.state_dim,
              rows.begin() + static_cast<std::ptrdiff_t>(i) * b.state_dim);
  return Tensor::from_vector({b.batch, b.state_dim}, std::move(rows));
}

}  // namespace rode
