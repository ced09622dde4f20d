#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
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

struct PolicyConfig {
  int hidden = 64;  // encoder width = GRU hidden
  int mixer_embed = 32;
  double gamma = 0.99;
  double lr = 5e-4;
  double grad_clip = 10.0;
  // Bootstrap restriction: the target max at t+1 ranges over the actions of
  // the role active at t+1 intersected with availability (default). The
  // unconstrained switch drops the role restriction and maximizes over all
  // available actions instead.
  bool unconstrained_bootstrap = false;
  // Conventional heads: h -> one value per action, replacing the dot-product
  // against action representations (the no-action-repr ablation).
  bool conventional_heads = false;
};

/// Lower level of the hierarchy: one linear head per role maps the history
/// encoding to z, actions are scored by dot product against their frozen
/// representations, and action choice is restricted to the role's subspace
/// intersected with the environment's available set.
class RolePolicyLearner {
 public:
  RolePolicyLearner(int obs_dim, int action_count, int n_agents, int state_dim,
                    const RoleSet& roles, const ActionReprTable& table, PolicyConfig cfg,
                    Rng& rng)
      : cfg_(cfg),
        obs_dim_(obs_dim),
        action_count_(action_count),
        n_agents_(n_agents),
        state_dim_(state_dim),
        roles_(roles) {
    if (roles_.action_count() != action_count_)
      throw std::runtime_error("RolePolicyLearner: role set covers a different action count");
    spec_ = EncoderInputSpec{obs_dim, action_count, n_agents,
                             /*prev_action=*/true, /*agent_id=*/true};
    if (!cfg_.conventional_heads) {
      if (!table.defined())
        throw std::runtime_error("RolePolicyLearner: dot-product heads need a frozen table");
      if (table.action_count() != action_count_)
        throw std::runtime_error("RolePolicyLearner: table covers a different action count");
      d_ = table.dim();
      // [d, A] so a head output z scores every action in one matmul; the
      // table is untracked, so no gradient ever reaches it.
      table_t_ = Tensor::zeros({d_, action_count_});
      for (int a = 0; a < action_count_; ++a)
        for (int i = 0; i < d_; ++i)
          table_t_.at(static_cast<std::size_t>(i) * action_count_ + a) =
              table.values().at(static_cast<std::size_t>(a) * d_ + i);
    }

    online_ = build_net(rng);
    target_ = build_net(rng);
    optimizer_ = std::make_unique<Rmsprop>(values_of(named_params()), cfg_.lr, 0.99,
                                           cfg_.grad_clip);
    sync_targets();
  }

  int role_count() const { return roles_.count(); }
  const RoleSet& roles() const { return roles_; }
  const PolicyConfig& config() const { return cfg_; }
  const EncoderInputSpec& input_spec() const { return spec_; }

  Tensor initial_hidden() const { return online_.enc.initial_hidden(1); }

  /// Times an agent's restricted action set was empty after intersecting
  /// with availability, forcing a fall back to the full available set.
  std::uint64_t fallback_count() const { return fallback_count_; }

  /// Acting path: one agent, one step. Advances `hidden` (detached) and
  /// returns an epsilon-greedy action from the role's subspace intersected
  /// with `avail`; an empty intersection falls back to the full available
  /// set and bumps the fallback counter.
  int act(const std::vector<double>& obs, int prev_action, int agent_id, int role,
          const std::vector<std::uint8_t>& avail, Tensor& hidden, double eps, Rng& rng) {
    if (static_cast<int>(avail.size()) != action_count_)
      throw std::runtime_error("RolePolicyLearner::act: availability vector has wrong length");
    const std::vector<int> allowed = allowed_actions(role, avail);
    Tensor x = encoder_input_row(obs, prev_action, agent_id, spec_);
    hidden = online_.enc.step(x, hidden).detach();
    if (eps > 0.0 && rng.uniform() < eps)
      return allowed[static_cast<std::size_t>(rng.next_int(static_cast<int>(allowed.size())))];
    Tensor q = action_values(online_, hidden, role);
    int best = allowed[0];
    for (int a : allowed)
      if (q.at(static_cast<std::size_t>(a)) > q.at(static_cast<std::size_t>(best))) best = a;
    return best;
  }

  /// Action values of role `j` for a hidden-state batch [R, hidden] -> [R, A].
  Tensor action_values(const Tensor& h, int j, bool use_target = false) const {
    return action_values(use_target ? target_ : online_, h, j);
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

  /// One-step TD loss through the monotonic mixer, with the recorded role
  /// selecting each agent's head at every step.
  Tensor policy_loss(const EpisodeBatch& batch) const {
    check_batch(batch);
    const int B = batch.batch, T = batch.steps, n = batch.n_agents, A = action_count_;
    const int R = B * n;
    const int K = roles_.count();

    std::vector<Tensor> h_online = encode_all(online_, batch, /*detach=*/false);
    std::vector<Tensor> h_target = encode_all(target_, batch, /*detach=*/true);

    Tensor loss_sum = Tensor::scalar(0.0);
    double filled_count = 0.0;
    for (int t = 0; t < T; ++t) {
      // Online Q for the recorded action under the recorded role: every
      // role's head scores all rows, and a 0/1 indicator keeps the one that
      // was active. Rows of inactive roles contribute exactly zero.
      std::vector<int> action_idx(static_cast<std::size_t>(R), 0);
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < n; ++i)
          action_idx[static_cast<std::size_t>(b) * n + i] =
              batch.action[batch.action_at(b, t) + static_cast<std::size_t>(i)];
      Tensor chosen;
      for (int j = 0; j < K; ++j) {
        std::vector<double> ind(static_cast<std::size_t>(R), 0.0);
        bool any = false;
        for (int b = 0; b < B; ++b)
          for (int i = 0; i < n; ++i) {
            const int rho = batch.role[batch.role_at(b, t) + static_cast<std::size_t>(i)];
            if (rho < 0 || rho >= K)
              throw std::runtime_error("policy_loss: recorded role " + std::to_string(rho) +
                                       " outside [0," + std::to_string(K) + ")");
            if (rho == j) {
              ind[static_cast<std::size_t>(b) * n + i] = 1.0;
              any = true;
            }
          }
        if (!any) continue;
        Tensor q_j = take_per_row(action_values(online_, h_online[static_cast<std::size_t>(t)], j),
                                  action_idx);
        Tensor picked = mul(q_j, Tensor::from_vector({R, 1}, std::move(ind)));
        chosen = chosen.defined() ? add(chosen, picked) : picked;
      }
      Tensor q_tot = online_.mixer.forward(reshape(chosen, {B, n}), batch_states(batch, t));

      // Target: per-agent greedy value at t+1 under the role active there,
      // restricted to available actions, through the target mixer. Numeric.
      std::vector<Tensor> tq;
      tq.reserve(static_cast<std::size_t>(K));
      for (int j = 0; j < K; ++j)
        tq.push_back(action_values(target_, h_target[static_cast<std::size_t>(t) + 1], j));
      std::vector<double> best(static_cast<std::size_t>(R), 0.0);
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < n; ++i) {
          const int r = b * n + i;
          const int rho = batch.role[batch.role_at(b, t + 1) + static_cast<std::size_t>(i)];
          const std::uint8_t* avail = batch.avail.data() + batch.avail_at(b, t + 1, i);
          const double* row =
              tq[static_cast<std::size_t>(rho)].data() + static_cast<std::size_t>(r) * A;
          double m = -std::numeric_limits<double>::infinity();
          if (!cfg_.unconstrained_bootstrap) {
            const std::vector<std::uint8_t>& mask = roles_.mask(rho);
            for (int a = 0; a < A; ++a)
              if (mask[static_cast<std::size_t>(a)] && avail[a]) m = std::max(m, row[a]);
          }
          if (m == -std::numeric_limits<double>::infinity()) {
            // Unconstrained mode, or an empty intersection: maximize over the
            // plain available set (always non-empty; padding is all-available).
            for (int a = 0; a < A; ++a)
              if (avail[a]) m = std::max(m, row[a]);
          }
          if (m == -std::numeric_limits<double>::infinity())
            throw std::runtime_error("policy_loss: no available action at a bootstrap step");
          best[static_cast<std::size_t>(r)] = m;
        }
      Tensor target_tot = target_.mixer.forward(Tensor::from_vector({B, n}, std::move(best)),
                                                batch_states(batch, t + 1));

      std::vector<double> y(static_cast<std::size_t>(B), 0.0);
      std::vector<double> mask(static_cast<std::size_t>(B), 0.0);
      for (int b = 0; b < B; ++b) {
        if (!batch.is_filled(b, t)) continue;
        mask[static_cast<std::size_t>(b)] = 1.0;
        filled_count += 1.0;
        const std::size_t f = batch.flat_at(b, t);
        const double done = batch.terminated[f] ? 1.0 : 0.0;
        y[static_cast<std::size_t>(b)] =
            batch.reward[f] + cfg_.gamma * (1.0 - done) * target_tot.at(static_cast<std::size_t>(b));
      }
      Tensor diff = sub(q_tot, Tensor::from_vector({B, 1}, std::move(y)));
      Tensor masked = mul(mul(diff, diff), Tensor::from_vector({B, 1}, std::move(mask)));
      loss_sum = add(loss_sum, sum(masked));
    }
    if (filled_count == 0.0)
      throw std::runtime_error("policy_loss: batch contains no filled steps");
    return scale(loss_sum, 1.0 / filled_count);
  }

  /// One optimizer step; returns the loss value.
  double train_step(const EpisodeBatch& batch) {
    Tensor loss = policy_loss(batch);
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
    std::vector<Linear> heads;  // one per role: h -> z (or h -> A values)
    MonotonicMixer mixer;
  };

  Net build_net(Rng& rng) {
    Net net;
    net.enc = TrajectoryEncoder(spec_.dim(), cfg_.hidden, /*recurrent=*/true, rng);
    const int out = cfg_.conventional_heads ? action_count_ : d_;
    net.heads.reserve(static_cast<std::size_t>(roles_.count()));
    for (int j = 0; j < roles_.count(); ++j) net.heads.emplace_back(cfg_.hidden, out, rng);
    net.mixer = MonotonicMixer(n_agents_, state_dim_, rng, cfg_.mixer_embed);
    return net;
  }

  NamedParams net_params(const Net& net) const {
    NamedParams p;
    append_named(p, "enc", net.enc.named_params());
    for (int j = 0; j < roles_.count(); ++j)
      append_named(p, "role" + std::to_string(j), net.heads[static_cast<std::size_t>(j)].named_params());
    append_named(p, "mixer", net.mixer.named_params());
    return p;
  }

  Tensor action_values(const Net& net, const Tensor& h, int j) const {
    if (j < 0 || j >= roles_.count())
      throw std::runtime_error("action_values: role index out of range");
    Tensor z = net.heads[static_cast<std::size_t>(j)].forward(h);
    if (cfg_.conventional_heads) return z;
    return matmul(z, table_t_);
  }

  std::vector<int> allowed_actions(int role, const std::vector<std::uint8_t>& avail) {
    if (role < 0 || role >= roles_.count())
      throw std::runtime_error("RolePolicyLearner: role index out of range");
    std::vector<int> allowed;
    const std::vector<std::uint8_t>& mask = roles_.mask(role);
    for (int a = 0; a < action_count_; ++a)
      if (mask[static_cast<std::size_t>(a)] && avail[static_cast<std::size_t>(a)])
        allowed.push_back(a);
    if (allowed.empty()) {
      ++fallback_count_;
      for (int a = 0; a < action_count_; ++a)
        if (avail[static_cast<std::size_t>(a)]) allowed.push_back(a);
    }
    if (allowed.empty())
      throw std::runtime_error("RolePolicyLearner::act: no action is available at all");
    return allowed;
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
      throw std::runtime_error("policies: batch layout does not match the learner");
  }

  PolicyConfig cfg_;
  int obs_dim_, action_count_, n_agents_, state_dim_;
  int d_ = 0;
  RoleSet roles_;
  EncoderInputSpec spec_;
  Tensor table_t_;  // [d, A], untracked
  Net online_, target_;
  std::unique_ptr<Rmsprop> optimizer_;
  std::uint64_t fallback_count_ = 0;
};

}  // namespace rode
