#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rode/agents/encoder.hpp"
#include "rode/core/optim.hpp"
#include "rode/core/rng.hpp"
#include "rode/core/tensor.hpp"
#include "rode/nets/layers.hpp"
#include "rode/nets/mixer.hpp"
#include "rode/replay/episode.hpp"
#include "rode/roles/roles.hpp"

namespace rode {

struct SelectorConfig {
  int hidden = 64;        // encoder width = GRU hidden
  int head_hidden = 64;   // f_beta hidden layer
  int mixer_embed = 32;
  int c = 5;              // role interval in primitive steps
  double gamma = 0.99;
  double lr = 5e-4;
  double grad_clip = 10.0;
  // Observation-only feedforward selector (no GRU, no previous action, no
  // agent id) instead of the recurrent history encoder.
  bool recurrent = true;
  // Conventional head: h -> K role values directly, replacing the
  // dot-product against role representations (the no-action-repr ablation).
  bool conventional_head = false;
  // Discounting inside the c-step window: the loss as printed keeps window
  // rewards undiscounted and applies a single gamma to the bootstrap; this
  // switch restores the conventional sum gamma^t r + gamma^len bootstrap.
  bool conventional_discount = false;
};

/// Top level of the hierarchy: every c steps each agent's history encoding
/// is mapped to z_tau and scored against the K role representations (dot
/// product), coordinated through a monotonic mixer, and trained with a
/// c-step TD loss against target-network copies.
class SelectorLearner {
 public:
  SelectorLearner(int obs_dim, int action_count, int n_agents, int state_dim,
                  const RoleSet& roles, const ActionReprTable& table, SelectorConfig cfg,
                  Rng& rng)
      : cfg_(cfg),
        obs_dim_(obs_dim),
        action_count_(action_count),
        n_agents_(n_agents),
        state_dim_(state_dim),
        K_(roles.count()) {
    if (cfg_.c < 1) throw std::runtime_error("SelectorLearner: role interval must be >= 1");
    if (K_ < 1) throw std::runtime_error("SelectorLearner: need at least one role");
    spec_ = EncoderInputSpec{obs_dim, action_count, n_agents,
                             /*prev_action=*/cfg_.recurrent, /*agent_id=*/cfg_.recurrent};
    if (!cfg_.conventional_head) {
      if (!table.defined())
        throw std::runtime_error("SelectorLearner: dot-product head needs a frozen table");
      // [d, K] so role values come from one matmul; rows detached by
      // construction (the table is untracked).
      Tensor reps = roles.representations(table);  // [K, d]
      d_ = table.dim();
      reps_t_ = Tensor::zeros({d_, K_});
      for (int j = 0; j < K_; ++j)
        for (int i = 0; i < d_; ++i)
          reps_t_.at(static_cast<std::size_t>(i) * K_ + j) =
              reps.at(static_cast<std::size_t>(j) * d_ + i);
    }

    online_ = build_net(rng);
    target_ = build_net(rng);
    optimizer_ = std::make_unique<Rmsprop>(values_of(named_params()), cfg_.lr, 0.99,
                                           cfg_.grad_clip);
    sync_targets();
  }

  int role_count() const { return K_; }
  const SelectorConfig& config() const { return cfg_; }
  const EncoderInputSpec& input_spec() const { return spec_; }

  Tensor initial_hidden() const { return online_.enc.initial_hidden(1); }

  /// Advances one agent's history encoding by a single step (detached). The
  /// encoding tracks every primitive step even though roles are only chosen
  /// at interval boundaries.
  void advance(const std::vector<double>& obs, int prev_action, int agent_id,
               Tensor& hidden) const {
    Tensor x = encoder_input_row(obs, prev_action, agent_id, spec_);
    hidden = online_.enc.step(x, hidden).detach();
  }

  /// Epsilon-greedy role from an already-advanced encoding; greedy ties go
  /// to the lowest index.
  int choose_role(const Tensor& hidden, double eps, Rng& rng) const {
    if (eps > 0.0 && rng.uniform() < eps) return rng.next_int(K_);
    Tensor q = role_values(online_, hidden);
    return argmax_row(q.data(), K_);
  }

  /// Acting path: one agent, one step. Advances `hidden` (detached) and
  /// returns the epsilon-greedy role.
  int act_role(const std::vector<double>& obs, int prev_action, int agent_id, Tensor& hidden,
               double eps, Rng& rng) const {
    advance(obs, prev_action, agent_id, hidden);
    return choose_role(hidden, eps, rng);
  }

  /// Role Q-values for a hidden-state batch [R, hidden] -> [R, K].
  Tensor role_values(const Tensor& h, bool use_target = false) const {
    return role_values(use_target ? target_ : online_, h);
  }

  /// Dot-product scores of an explicit z row [R, d] against the role
  /// representations (exposes the scale-invariance property directly).
  Tensor role_values_from_z(const Tensor& z) const {
    if (cfg_.conventional_head)
      throw std::runtime_error("role_values_from_z: conventional head has no z");
    return matmul(z, reps_t_);
  }

  /// Hidden state at every slot 0..steps for a whole batch; rows are
  /// (batch-major, agent-minor). Target encodings are value-only.
  std::vector<Tensor> encode(const EpisodeBatch& batch, bool use_target = false) const {
    check_batch(batch);
    return encode_all(use_target ? target_ : online_, batch, /*detach=*/use_target);
  }

  /// Monotonic mixing of per-agent values [B, n] under a state batch [B, S].
  Tensor mix(const Tensor& q, const Tensor& state, bool use_target = false) const {
    return (use_target ? target_ : online_).mixer.forward(q, state);
  }

  /// c-step TD loss over selection boundaries t in {0, c, 2c, ...}.
  Tensor selector_loss(const EpisodeBatch& batch) const {
    check_batch(batch);
    const int B = batch.batch, T = batch.steps, n = batch.n_agents;
    const int R = B * n;
    const std::vector<int> lengths = batch_lengths(batch);

    // Unrolled encodings for every slot 0..T: online keeps the graph, the
    // target pass is value-only.
    std::vector<Tensor> h_online = encode_all(online_, batch, /*detach=*/false);
    std::vector<Tensor> h_target = encode_all(target_, batch, /*detach=*/true);

    // Target Q_tot at every slot: per-agent greedy role under the target
    // net, coordinated by the target mixer. Plain numbers, no gradients.
    std::vector<std::vector<double>> target_tot(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
      Tensor q = role_values(target_, h_target[static_cast<std::size_t>(t)]);
      std::vector<double> best(static_cast<std::size_t>(R), 0.0);
      for (int r = 0; r < R; ++r) {
        const double* row = q.data() + static_cast<std::size_t>(r) * K_;
        best[static_cast<std::size_t>(r)] = row[argmax_row(row, K_)];
      }
      Tensor mixed = target_.mixer.forward(Tensor::from_vector({B, n}, std::move(best)),
                                           batch_states(batch, t));
      target_tot[static_cast<std::size_t>(t)] =
          std::vector<double>(mixed.data(), mixed.data() + B);
    }

    Tensor loss_sum = Tensor::scalar(0.0);
    double boundary_count = 0.0;
    for (int t = 0; t < T; t += cfg_.c) {
      std::vector<double> mask(static_cast<std::size_t>(B), 0.0);
      std::vector<double> target(static_cast<std::size_t>(B), 0.0);
      bool any = false;
      for (int b = 0; b < B; ++b) {
        if (!batch.is_filled(b, t)) continue;
        any = true;
        mask[static_cast<std::size_t>(b)] = 1.0;
        boundary_count += 1.0;
        const int len = lengths[static_cast<std::size_t>(b)];
        const int window_end = std::min(t + cfg_.c, len);
        double reward_sum = 0.0, discount = 1.0;
        for (int u = t; u < window_end; ++u) {
          reward_sum += discount * batch.reward[batch.flat_at(b, u)];
          if (cfg_.conventional_discount) discount *= cfg_.gamma;
        }
        const bool terminal =
            window_end == len && batch.terminated[batch.flat_at(b, len - 1)] != 0;
        const double bootstrap_weight =
            cfg_.conventional_discount
                ? std::pow(cfg_.gamma, static_cast<double>(window_end - t))
                : cfg_.gamma;
        const double bootstrap =
            terminal ? 0.0
                     : bootstrap_weight *
                           target_tot[static_cast<std::size_t>(window_end)][static_cast<std::size_t>(b)];
        target[static_cast<std::size_t>(b)] = reward_sum + bootstrap;
      }
      if (!any) continue;

      // Online Q_tot for the recorded roles at this boundary.
      std::vector<int> role_idx(static_cast<std::size_t>(R), 0);
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < n; ++i) {
          const int rho = batch.role[batch.role_at(b, t) + static_cast<std::size_t>(i)];
          if (rho < 0 || rho >= K_)
            throw std::runtime_error("selector_loss: recorded role " + std::to_string(rho) +
                                     " outside [0," + std::to_string(K_) + ")");
          role_idx[static_cast<std::size_t>(b) * n + i] = rho;
        }
      Tensor q_all = role_values(online_, h_online[static_cast<std::size_t>(t)]);
      Tensor q_chosen = reshape(take_per_row(q_all, role_idx), {B, n});
      Tensor q_tot = online_.mixer.forward(q_chosen, batch_states(batch, t));

      Tensor diff = sub(q_tot, Tensor::from_vector({B, 1}, std::move(target)));
      Tensor masked = mul(mul(diff, diff), Tensor::from_vector({B, 1}, std::move(mask)));
      loss_sum = add(loss_sum, sum(masked));
    }
    if (boundary_count == 0.0)
      throw std::runtime_error("selector_loss: batch contains no filled boundaries");
    return scale(loss_sum, 1.0 / boundary_count);
  }

  /// One optimizer step; returns the loss value.
  double train_step(const EpisodeBatch& batch) {
    Tensor loss = selector_loss(batch);
    loss.backward();
    optimizer_->step();
    return loss.value();
  }

  void sync_targets() { copy_params(target_params(), named_params()); }

  NamedParams named_params() const { return net_params(online_); }
  NamedParams target_params() const { return net_params(target_); }

 private:
  struct Net {
    TrajectoryEncoder enc;
    Mlp fbeta;          // dot-product head: h -> z_tau
    Linear conv_head;   // conventional head: h -> K values
    MonotonicMixer mixer;
  };

  Net build_net(Rng& rng) {
    Net net;
    net.enc = TrajectoryEncoder(spec_.dim(), cfg_.hidden, cfg_.recurrent, rng);
    if (cfg_.conventional_head)
      net.conv_head = Linear(cfg_.hidden, K_, rng);
    else
      net.fbeta = Mlp({cfg_.hidden, cfg_.head_hidden, d_}, rng);
    net.mixer = MonotonicMixer(n_agents_, state_dim_, rng, cfg_.mixer_embed);
    return net;
  }

  NamedParams net_params(const Net& net) const {
    NamedParams p;
    append_named(p, "enc", net.enc.named_params());
    if (cfg_.conventional_head)
      append_named(p, "head", net.conv_head.named_params());
    else
      append_named(p, "head", net.fbeta.named_params());
    append_named(p, "mixer", net.mixer.named_params());
    return p;
  }

  Tensor role_values(const Net& net, const Tensor& h) const {
    if (cfg_.conventional_head) return net.conv_head.forward(h);
    return matmul(net.fbeta.forward(h), reps_t_);
  }

  std::vector<Tensor> encode_all(const Net& net, const EpisodeBatch& batch, bool detach) const {
    const int R = batch.batch * batch.n_agents;
    std::vector<Tensor> hs;
    hs.reserve(static_cast<std::size_t>(batch.steps) + 1);
    Tensor h = net.enc.initial_hidden(R);
    for (int t = 0; t <= batch.steps; ++t) {
      h = net.enc.step(encoder_inputs(batch, t, spec_), h);
      if (detach) h = h.detach();
      hs.push_back(h);
    }
    return hs;
  }

  void check_batch(const EpisodeBatch& batch) const {
    if (batch.obs_dim != obs_dim_ || batch.action_count != action_count_ ||
        batch.n_agents != n_agents_ || batch.state_dim != state_dim_)
      throw std::runtime_error("selector: batch layout does not match the learner");
  }

  static int argmax_row(const double* row, int len) {
    int best = 0;
    for (int j = 1; j < len; ++j)
      if (row[j] > row[best]) best = j;  // strict: ties keep the lowest index
    return best;
  }

  SelectorConfig cfg_;
  int obs_dim_, action_count_, n_agents_, state_dim_;
  int K_;
  int d_ = 0;
  EncoderInputSpec spec_;
  Tensor reps_t_;  // [d, K], untracked
  Net online_, target_;
  std::unique_ptr<Rmsprop> optimizer_;
};

}  // namespace rode
