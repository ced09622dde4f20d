#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rode/core/optim.hpp"
#include "rode/core/rng.hpp"
#include "rode/core/tensor.hpp"
#include "rode/nets/layers.hpp"
#include "rode/replay/buffer.hpp"

namespace rode {

/// Frozen |A| x d matrix of action representations. Immutable once built;
/// rows are read with detached gradients only.
class ActionReprTable {
 public:
  ActionReprTable() = default;
  ActionReprTable(Tensor values, int action_count, int dim)
      : values_(std::move(values)), action_count_(action_count), dim_(dim) {}

  bool defined() const { return values_.defined(); }
  int action_count() const { return action_count_; }
  int dim() const { return dim_; }

  /// Detached [|A|, d] matrix; safe to feed forward passes.
  const Tensor& values() const { return values_; }

  std::vector<double> row(int action) const {
    if (action < 0 || action >= action_count_)
      throw std::runtime_error("ActionReprTable: action index out of range");
    const double* p = values_.data() + static_cast<std::size_t>(action) * dim_;
    return std::vector<double>(p, p + dim_);
  }

 private:
  Tensor values_;  // untracked
  int action_count_ = 0;
  int dim_ = 0;
};

struct ActionReprConfig {
  int dim = 20;           // d
  int hidden = 64;        // predictor hidden width
  double lambda_reward = 10.0;
  double lr = 5e-4;
  double grad_clip = 10.0;
  // Others-action encoding: fixed-order concatenation by default; count
  // encoding (summed one-hots) is size-independent and used for transfer.
  bool count_encoding = false;
};

/// Phase-1 model: action encoder (an |A| x d embedding — the linear image of
/// the one-hot action), observation predictor, and reward predictor, trained
/// jointly on the effect-prediction loss
///
///   L = E[ ||p_o(z_a, o, a_others) - o'||^2
///          + lambda * (p_r(z_a, o, a_others) - r)^2 ]
///
/// with the expectation estimated as a masked mean over batch entries,
/// timesteps, and agents.
class ActionReprLearner {
 public:
  ActionReprLearner(int action_count, int obs_dim, int n_agents, ActionReprConfig cfg, Rng& rng)
      : cfg_(cfg),
        action_count_(action_count),
        obs_dim_(obs_dim),
        n_agents_(n_agents),
        embedding_(Tensor::zeros({action_count, cfg.dim}, true)) {
    init_uniform_fanin(embedding_, action_count, rng);
    others_dim_ = cfg_.count_encoding ? action_count : (n_agents - 1) * action_count;
    const int in_dim = cfg_.dim + obs_dim + others_dim_;
    obs_predictor_ = Mlp({in_dim, cfg_.hidden, obs_dim}, rng);
    reward_predictor_ = Mlp({in_dim, cfg_.hidden, 1}, rng);
    NamedParams all = named_params();
    optimizer_ = std::make_unique<Rmsprop>(values_of(all), cfg_.lr, 0.99, cfg_.grad_clip);
  }

  int dim() const { return cfg_.dim; }
  int action_count() const { return action_count_; }
  bool frozen() const { return frozen_; }

  /// One embedding row, detached.
  std::vector<double> encode_action(int action) const {
    if (action < 0 || action >= action_count_)
      throw std::runtime_error("encode_action: index " + std::to_string(action) +
                               " out of range [0," + std::to_string(action_count_) + ")");
    const double* p = embedding_.data() + static_cast<std::size_t>(action) * cfg_.dim;
    return std::vector<double>(p, p + cfg_.dim);
  }

  /// Effect-prediction loss over a sampled batch (differentiable).
  Tensor repr_loss(const EpisodeBatch& batch) const {
    if (batch.n_agents != n_agents_ || batch.obs_dim != obs_dim_ ||
        batch.action_count != action_count_)
      throw std::runtime_error("repr_loss: batch layout does not match the learner");
    const int B = batch.batch, T = batch.steps, n = batch.n_agents;
    const int R = B * T * n;

    std::vector<int> act_rows;
    act_rows.reserve(static_cast<std::size_t>(R));
    std::vector<double> rest(static_cast<std::size_t>(R) * (obs_dim_ + others_dim_), 0.0);
    std::vector<double> target_obs(static_cast<std::size_t>(R) * obs_dim_, 0.0);
    std::vector<double> target_rew(static_cast<std::size_t>(R), 0.0);
    std::vector<double> mask(static_cast<std::size_t>(R), 0.0);
    double filled_count = 0.0;

    std::size_t row = 0;
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < T; ++t) {
        const bool filled = batch.is_filled(b, t);
        if (filled) filled_count += 1.0;
        const int* actions = batch.action.data() + batch.action_at(b, t);
        for (int i = 0; i < n; ++i, ++row) {
          act_rows.push_back(actions[i]);
          double* rrow = rest.data() + row * (obs_dim_ + others_dim_);
          const double* obs = batch.obs.data() + batch.obs_at(b, t, i);
          std::copy(obs, obs + obs_dim_, rrow);
          double* others = rrow + obs_dim_;
          if (cfg_.count_encoding) {
            for (int j = 0; j < n; ++j)
              if (j != i) others[actions[j]] += 1.0;
          } else {
            int slot = 0;
            for (int j = 0; j < n; ++j) {
              if (j == i) continue;
              others[slot * action_count_ + actions[j]] = 1.0;
              ++slot;
            }
          }
          const double* next_obs = batch.obs.data() + batch.obs_at(b, t + 1, i);
          std::copy(next_obs, next_obs + obs_dim_, target_obs.data() + row * obs_dim_);
          target_rew[row] = batch.reward[batch.flat_at(b, t)];
          mask[row] = filled ? 1.0 : 0.0;
        }
      }
    }

    Tensor z = gather_rows(embedding_, act_rows);  // [R, d]
    Tensor x = concat_cols(
        {z, Tensor::from_vector({R, obs_dim_ + others_dim_}, std::move(rest))});
    Tensor obs_err;
    {
      Tensor diff = sub(obs_predictor_.forward(x),
                        Tensor::from_vector({R, obs_dim_}, std::move(target_obs)));
      obs_err = sum_cols(mul(diff, diff));  // [R, 1]
    }
    Tensor rew_err;
    {
      Tensor diff = sub(reward_predictor_.forward(x),
                        Tensor::from_vector({R, 1}, std::move(target_rew)));
      rew_err = mul(diff, diff);
    }
    Tensor per_row = add(obs_err, scale(rew_err, cfg_.lambda_reward));
    Tensor masked = mul(per_row, Tensor::from_vector({R, 1}, std::move(mask)));
    const double denom = filled_count * n;
    if (denom <= 0.0) throw std::runtime_error("repr_loss: batch contains no filled steps");
    return scale(sum(masked), 1.0 / denom);
  }

  /// One optimizer step against repr_loss on a sampled batch. Returns the
  /// loss, or nothing when the buffer cannot fill a batch yet.
  std::optional<double> train_step(const ReplayBuffer& buffer, int batch_size, Rng& rng) {
    if (frozen_) throw std::runtime_error("train_step: representations are frozen");
    if (!buffer.ready(batch_size)) return std::nullopt;
    EpisodeBatch batch = buffer.sample(batch_size, rng);
    Tensor loss = repr_loss(batch);
    loss.backward();
    optimizer_->step();
    return loss.value();
  }

  /// Snapshots the embedding into an immutable table and blocks further
  /// training. Callable exactly once.
  ActionReprTable freeze() {
    if (frozen_) throw std::runtime_error("freeze: representations already frozen");
    frozen_ = true;
    Tensor copy = Tensor::zeros({action_count_, cfg_.dim});
    std::copy(embedding_.data(), embedding_.data() + embedding_.numel(), copy.data());
    return ActionReprTable(copy, action_count_, cfg_.dim);
  }

  NamedParams named_params() const {
    NamedParams p{{"embedding", embedding_}};
    append_named(p, "obs_pred", obs_predictor_.named_params());
    append_named(p, "rew_pred", reward_predictor_.named_params());
    return p;
  }

  const Mlp& obs_predictor() const { return obs_predictor_; }
  const Mlp& reward_predictor() const { return reward_predictor_; }
  double lambda_reward() const { return cfg_.lambda_reward; }

 private:
  ActionReprConfig cfg_;
  int action_count_;
  int obs_dim_;
  int n_agents_;
  int others_dim_;
  Tensor embedding_;
  Mlp obs_predictor_;
  Mlp reward_predictor_;
  std::unique_ptr<Rmsprop> optimizer_;
  bool frozen_ = false;
};

}  // namespace rode
