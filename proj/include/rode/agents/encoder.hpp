#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "rode/core/rng.hpp"
#include "rode/core/tensor.hpp"
#include "rode/nets/layers.hpp"
#include "rode/replay/episode.hpp"

namespace rode {

/// What goes into one encoder input row alongside the observation.
struct EncoderInputSpec {
  int obs_dim = 0;
  int action_count = 0;
  int n_agents = 0;
  bool prev_action = true;  // previous-action one-hot
  bool agent_id = true;     // agent-index one-hot

  int dim() const {
    return obs_dim + (prev_action ? action_count : 0) + (agent_id ? n_agents : 0);
  }
};

/// One input row for the acting path. prev_action = -1 encodes "episode
/// start" (zero one-hot).
inline Tensor encoder_input_row(const std::vector<double>& obs, int prev_action, int agent_id,
                                const EncoderInputSpec& spec) {
  if (static_cast<int>(obs.size()) != spec.obs_dim)
    throw std::runtime_error("encoder_input_row: observation has " +
                             std::to_string(obs.size()) + " entries, expected " +
                             std::to_string(spec.obs_dim));
  std::vector<double> row(static_cast<std::size_t>(spec.dim()), 0.0);
  std::copy(obs.begin(), obs.end(), row.begin());
  int off = spec.obs_dim;
  if (spec.prev_action) {
    if (prev_action >= spec.action_count)
      throw std::runtime_error("encoder_input_row: previous action out of range");
    if (prev_action >= 0) row[static_cast<std::size_t>(off + prev_action)] = 1.0;
    off += spec.action_count;
  }
  if (spec.agent_id) {
    if (agent_id < 0 || agent_id >= spec.n_agents)
      throw std::runtime_error("encoder_input_row: agent id out of range");
    row[static_cast<std::size_t>(off + agent_id)] = 1.0;
  }
  return Tensor::from_vector({1, spec.dim()}, std::move(row));
}

/// Batched input rows for timestep t, ordered batch-major then agent-minor
/// (row = b * n + i). The previous action at t is the recorded action at
/// t - 1 (zeros at t = 0); t may equal batch.steps for the bootstrap slot.
inline Tensor encoder_inputs(const EpisodeBatch& batch, int t, const EncoderInputSpec& spec) {
  if (t < 0 || t > batch.steps) throw std::runtime_error("encoder_inputs: timestep out of range");
  if (spec.obs_dim != batch.obs_dim || spec.action_count != batch.action_count ||
      spec.n_agents != batch.n_agents)
    throw std::runtime_error("encoder_inputs: spec does not match the batch layout");
  const int B = batch.batch, n = batch.n_agents, D = spec.dim();
  std::vector<double> rows(static_cast<std::size_t>(B) * n * D, 0.0);
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < n; ++i) {
      double* row = rows.data() + (static_cast<std::size_t>(b) * n + i) * D;
      const double* obs = batch.obs.data() + batch.obs_at(b, t, i);
      std::copy(obs, obs + spec.obs_dim, row);
      int off = spec.obs_dim;
      if (spec.prev_action) {
        if (t > 0) {
          const int prev = batch.action[batch.action_at(b, t - 1) + static_cast<std::size_t>(i)];
          row[static_cast<std::size_t>(off + prev)] = 1.0;
        }
        off += spec.action_count;
      }
      if (spec.agent_id) row[static_cast<std::size_t>(off + i)] = 1.0;
    }
  }
  return Tensor::from_vector({B * n, D}, std::move(rows));
}

/// Shared trajectory encoder: a linear layer feeding a GRU (recurrent mode),
/// or the linear layer alone for the observation-only selector variant.
/// Either way h_tau is the returned hidden vector.
class TrajectoryEncoder {
 public:
  TrajectoryEncoder() = default;
  TrajectoryEncoder(int input_dim, int hidden, bool recurrent, Rng& rng)
      : fc_(input_dim, hidden, rng), recurrent_(recurrent), hidden_(hidden) {
    if (recurrent_) gru_ = GruCell(hidden, hidden, rng);
  }

  int hidden_dim() const { return hidden_; }
  int input_dim() const { return fc_.in_dim(); }
  bool recurrent() const { return recurrent_; }

  Tensor initial_hidden(int rows) const { return Tensor::zeros({rows, hidden_}); }

  /// One step: x [R, input_dim], h [R, hidden] -> new hidden [R, hidden].
  Tensor step(const Tensor& x, const Tensor& h) const {
    Tensor a = relu(fc_.forward(x));
    return recurrent_ ? gru_.forward(a, h) : a;
  }

  NamedParams named_params() const {
    NamedParams p;
    append_named(p, "fc", fc_.named_params());
    if (recurrent_) append_named(p, "gru", gru_.named_params());
    return p;
  }

 private:
  Linear fc_;
  GruCell gru_;
  bool recurrent_ = true;
  int hidden_ = 64;
};

}  // namespace rode
