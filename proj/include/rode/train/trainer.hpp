#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rode/agents/policies.hpp"
#include "rode/agents/selector.hpp"
#include "rode/repr/action_repr.hpp"
#include "rode/replay/buffer.hpp"
#include "rode/roles/roles.hpp"
#include "rode/train/config.hpp"
#include "rode/train/metrics.hpp"

namespace rode {

/// Raised when a training loss stops being finite. Distinct from plain
/// runtime_error so the command line can map it to its own exit code.
class NanAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Greedy-rollout statistics over a batch of evaluation episodes.
struct EvalStats {
  double win_rate = 0.0;
  double mean_return = 0.0;
  std::vector<double> role_freq;  // normalized over role decisions; empty for random play
};

/// Everything a finished run hands to checkpointing and reporting.
struct TrainOutcome {
  ActionReprTable table;  // undefined when representation learning was skipped
  RoleSet roles;
  std::shared_ptr<SelectorLearner> selector;
  std::shared_ptr<RolePolicyLearner> policies;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  std::int64_t phase2_episodes = 0;
  std::int64_t selector_updates = 0;
  std::int64_t policy_updates = 0;
  std::uint64_t fallback_events = 0;
  std::vector<std::int64_t> role_counts;  // training-time role decisions per role
  EvalStats final_eval;
};

/// Linear exploration schedule over steps taken since the hierarchy came
/// online (the random-collection phase never consults it).
inline double epsilon_at(const TrainSettings& t, std::int64_t phase2_step) {
  if (phase2_step <= 0) return t.epsilon_start;
  if (phase2_step >= t.epsilon_anneal_steps) return t.epsilon_end;
  const double frac =
      static_cast<double>(phase2_step) / static_cast<double>(t.epsilon_anneal_steps);
  return t.epsilon_start - (t.epsilon_start - t.epsilon_end) * frac;
}

/// Random restricted action spaces: each action joins each role with
/// probability 1/2. A draw is accepted once every role has at least two
/// actions (one when only one exists) and the union covers the action set;
/// generation retries a bounded number of times before giving up.
inline RoleSet random_roles(int k, int action_count, Rng& rng) {
  if (k < 1) throw std::runtime_error("random_roles: need at least one role");
  if (action_count < 1) throw std::runtime_error("random_roles: need at least one action");
  const int min_size = std::min(2, action_count);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(action_count), 0);
    for (auto& role : members)
      for (int a = 0; a < action_count; ++a)
        if (rng.bernoulli(0.5)) {
          role.push_back(a);
          covered[static_cast<std::size_t>(a)] = 1;
        }
    bool ok = true;
    for (const auto& role : members) ok = ok && static_cast<int>(role.size()) >= min_size;
    for (std::uint8_t c : covered) ok = ok && c != 0;
    if (ok) return RoleSet(action_count, std::move(members));
  }
  throw std::runtime_error("random_roles: no covering draw within 1000 attempts");
}

inline SelectorConfig selector_config_from(const TrainSettings& t, const AblationFlags& a,
                                           double gamma) {
  SelectorConfig c;
  c.hidden = t.hidden;
  c.mixer_embed = t.mixer_embed;
  c.c = t.role_interval;
  c.gamma = gamma;
  c.lr = t.learning_rate;
  c.grad_clip = t.grad_clip;
  c.recurrent = t.recurrent_selector;
  c.conventional_head = a.conventional_q;
  c.conventional_discount = t.conventional_discount;
  return c;
}

inline PolicyConfig policy_config_from(const TrainSettings& t, const AblationFlags& a,
                                       double gamma) {
  PolicyConfig c;
  c.hidden = t.hidden;
  c.mixer_embed = t.mixer_embed;
  c.gamma = gamma;
  c.lr = t.learning_rate;
  c.grad_clip = t.grad_clip;
  c.unconstrained_bootstrap = !t.constrained_bootstrap;
  c.conventional_heads = a.conventional_q;
  return c;
}

/// Exploration-free rollouts of the trained hierarchy. Role decisions happen
/// every `role_interval` steps; frequencies are normalized over decisions.
inline EvalStats evaluate_policy(Env& env, const SelectorLearner& selector,
                                 RolePolicyLearner& policies, int role_interval, int episodes,
                                 Rng& rng) {
  if (episodes < 1) throw std::runtime_error("evaluate_policy: need at least one episode");
  if (role_interval < 1) throw std::runtime_error("evaluate_policy: role interval must be >= 1");
  const EnvSpec& spec = env.spec();
  const int n = spec.n_agents;
  EvalStats stats;
  stats.role_freq.assign(static_cast<std::size_t>(selector.role_count()), 0.0);
  double decisions = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng.next_u64());
    std::vector<Tensor> sel_h, pol_h;
    sel_h.reserve(static_cast<std::size_t>(n));
    pol_h.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      sel_h.push_back(selector.initial_hidden());
      pol_h.push_back(policies.initial_hidden());
    }
    std::vector<int> prev(static_cast<std::size_t>(n), -1);
    std::vector<int> role(static_cast<std::size_t>(n), 0);
    double ep_return = 0.0;
    for (int t = 0;; ++t) {
      std::vector<int> joint(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        const std::vector<double> obs = env.observe(i);
        selector.advance(obs, prev[ui], i, sel_h[ui]);
        if (t % role_interval == 0) {
          role[ui] = selector.choose_role(sel_h[ui], 0.0, rng);
          stats.role_freq[static_cast<std::size_t>(role[ui])] += 1.0;
          decisions += 1.0;
        }
        joint[ui] = policies.act(obs, prev[ui], i, role[ui], env.available_actions(i), pol_h[ui],
                                 0.0, rng);
      }
      const StepResult sr = env.step(joint);
      ep_return += sr.reward;
      prev = joint;
      if (sr.done) {
        if (sr.won) stats.win_rate += 1.0;
        break;
      }
    }
    stats.mean_return += ep_return;
  }
  stats.win_rate /= static_cast<double>(episodes);
  stats.mean_return /= static_cast<double>(episodes);
  if (decisions > 0.0)
    for (double& f : stats.role_freq) f /= decisions;
  return stats;
}

/// One uniform-random episode, truncated at `budget` steps so a caller can
/// land a collection phase on an exact step count. Role slots stay 0.
inline Episode collect_random_episode(Env& env, std::uint64_t env_seed, Rng& act_rng,
                                      std::int64_t budget) {
  const EnvSpec& spec = env.spec();
  const int n = spec.n_agents;
  env.reset(env_seed);
  Episode ep;
  ep.n_agents = n;
  ep.obs_dim = spec.obs_dim;
  ep.state_dim = spec.state_dim;
  ep.action_count = spec.action_count;
  bool done = false;
  bool won = false;
  int len = 0;
  for (int t = 0;; ++t) {
    const std::vector<double> state = env.state();
    ep.state.insert(ep.state.end(), state.begin(), state.end());
    std::vector<std::vector<std::uint8_t>> avail(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const std::vector<double> obs = env.observe(i);
      ep.obs.insert(ep.obs.end(), obs.begin(), obs.end());
      avail[static_cast<std::size_t>(i)] = env.available_actions(i);
      ep.avail.insert(ep.avail.end(), avail[static_cast<std::size_t>(i)].begin(),
                      avail[static_cast<std::size_t>(i)].end());
      ep.role.push_back(0);
    }
    if (done || t >= budget) break;
    std::vector<int> joint(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::vector<int> options;
      for (int a = 0; a < spec.action_count; ++a)
        if (avail[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]) options.push_back(a);
      joint[static_cast<std::size_t>(i)] =
          options[static_cast<std::size_t>(act_rng.next_int(static_cast<int>(options.size())))];
      ep.action.push_back(joint[static_cast<std::size_t>(i)]);
    }
    const StepResult sr = env.step(joint);
    ep.reward.push_back(sr.reward);
    ep.terminated.push_back(sr.done && !sr.timeout ? 1 : 0);
    done = sr.done;
    won = sr.won;
    ++len;
  }
  ep.length = len;
  ep.won = done && won;
  return ep;
}

/// Uniform-over-available-actions baseline under the same protocol.
inline EvalStats evaluate_random(Env& env, int episodes, Rng& rng) {
  if (episodes < 1) throw std::runtime_error("evaluate_random: need at least one episode");
  const EnvSpec& spec = env.spec();
  const int n = spec.n_agents;
  EvalStats stats;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng.next_u64());
    double ep_return = 0.0;
    while (true) {
      std::vector<int> joint(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const std::vector<std::uint8_t> avail = env.available_actions(i);
        std::vector<int> options;
        for (int a = 0; a < spec.action_count; ++a)
          if (avail[static_cast<std::size_t>(a)]) options.push_back(a);
        joint[static_cast<std::size_t>(i)] =
            options[static_cast<std::size_t>(rng.next_int(static_cast<int>(options.size())))];
      }
      const StepResult sr = env.step(joint);
      ep_return += sr.reward;
      if (sr.done) {
        if (sr.won) stats.win_rate += 1.0;
        break;
      }
    }
    stats.mean_return += ep_return;
  }
  stats.win_rate /= static_cast<double>(episodes);
  stats.mean_return /= static_cast<double>(episodes);
  return stats;
}

/// Two-phase training driver.
///
/// Phase 1 (steps 0 .. t_e): uniform-random behavior fills the replay buffer
/// while the effect predictor trains once per episode. At exactly t_e the
/// representation table freezes, the action space factors into roles, and
/// both hierarchy levels are instantiated. Phase 2 (t_e .. total_steps):
/// ε-greedy hierarchical rollouts with one policy update and one selector
/// update per completed episode, periodic target syncs and evaluations.
/// Phase-1 episodes stay in the buffer, so early phase-2 batches mix random
/// and hierarchical experience; their role slots read as role 0.
///
/// Every stochastic choice draws from a stream named for its purpose, so a
/// (config, seed) pair reproduces the metrics log byte for byte.
class Trainer {
 public:
  explicit Trainer(ExperimentConfig cfg, MetricsWriter* metrics = nullptr)
      : cfg_(std::move(cfg)),
        env_(make_configured_env(cfg_)),
        eval_env_(make_configured_env(cfg_)),
        repr_rng_(Rng::stream(cfg_.seed, "repr")),
        cluster_rng_(Rng::stream(cfg_.seed, "cluster")),
        init_rng_(Rng::stream(cfg_.seed, "init")),
        act_rng_(Rng::stream(cfg_.seed, "act")),
        sample_rng_(Rng::stream(cfg_.seed, "sample")),
        envseed_rng_(Rng::stream(cfg_.seed, "envseed")),
        eval_rng_(Rng::stream(cfg_.seed, "eval")),
        buffer_(cfg_.train.buffer_capacity, env_->spec().episode_limit),
        metrics_(metrics) {
    cfg_.validate();
    const EnvSpec& spec = env_->spec();
    ActionReprConfig rc;
    rc.dim = cfg_.train.repr_dim;
    rc.hidden = cfg_.train.repr_hidden;
    rc.lambda_reward = cfg_.train.lambda_reward;
    rc.lr = cfg_.train.learning_rate;
    rc.grad_clip = cfg_.train.grad_clip;
    rc.count_encoding = cfg_.train.count_encoding;
    repr_ = std::make_unique<ActionReprLearner>(spec.action_count, spec.obs_dim, spec.n_agents,
                                                rc, repr_rng_);
  }

  TrainOutcome run() {
    run_phase1();
    transition();
    run_phase2();
    return finish();
  }

  std::int64_t env_steps() const { return steps_; }
  std::int64_t episode_count() const { return episodes_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const RoleSet& roles() const { return roles_; }

  /// Called with the current step after each periodic evaluation, so a
  /// driver can snapshot mid-run state.
  void set_eval_hook(std::function<void(std::int64_t)> hook) { eval_hook_ = std::move(hook); }

  /// Current trained state without the final evaluation; only meaningful
  /// once the hierarchy exists (phase 2).
  TrainOutcome partial_outcome() const {
    if (!selector_ || !policies_)
      throw std::runtime_error("partial_outcome: hierarchy not instantiated yet (still phase 1)");
    TrainOutcome out;
    out.table = table_;
    out.roles = roles_;
    out.selector = selector_;
    out.policies = policies_;
    out.env_steps = steps_;
    out.episodes = episodes_;
    out.phase2_episodes = phase2_episodes_;
    out.selector_updates = selector_updates_;
    out.policy_updates = policy_updates_;
    out.fallback_events = policies_->fallback_count();
    out.role_counts = role_counts_;
    return out;
  }

 private:
  void check_finite(const char* name, double value) {
    if (std::isfinite(value)) return;
    if (metrics_)
      metrics_->record({{"step", steps_}, {"event", "nan_abort"}, {"loss", name}});
    throw NanAbort(std::string("training aborted: ") + name + " is not finite at step " +
                   std::to_string(steps_) + " (episode " + std::to_string(episodes_) + ")");
  }

  // Hierarchical ε-greedy behavior. Role decisions fire at t ≡ 0 (mod c) on
  // acting steps only — the final recorded slot carries the last role rather
  // than firing again, so an episode of length T sees exactly ⌈T/c⌉
  // decisions per agent. `fires` accumulates decisions per role.
  Episode roll_hierarchical(std::int64_t budget, std::vector<std::int64_t>& fires) {
    const EnvSpec& spec = env_->spec();
    const TrainSettings& ts = cfg_.train;
    const int n = spec.n_agents;
    env_->reset(envseed_rng_.next_u64());
    Episode ep;
    ep.n_agents = n;
    ep.obs_dim = spec.obs_dim;
    ep.state_dim = spec.state_dim;
    ep.action_count = spec.action_count;
    std::vector<Tensor> sel_h, pol_h;
    sel_h.reserve(static_cast<std::size_t>(n));
    pol_h.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      sel_h.push_back(selector_->initial_hidden());
      pol_h.push_back(policies_->initial_hidden());
    }
    std::vector<int> prev(static_cast<std::size_t>(n), -1);
    std::vector<int> role(static_cast<std::size_t>(n), 0);
    bool done = false;
    bool won = false;
    int len = 0;
    for (int t = 0;; ++t) {
      const std::vector<double> state = env_->state();
      ep.state.insert(ep.state.end(), state.begin(), state.end());
      std::vector<std::vector<double>> obs(static_cast<std::size_t>(n));
      std::vector<std::vector<std::uint8_t>> avail(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        obs[ui] = env_->observe(i);
        avail[ui] = env_->available_actions(i);
        ep.obs.insert(ep.obs.end(), obs[ui].begin(), obs[ui].end());
        ep.avail.insert(ep.avail.end(), avail[ui].begin(), avail[ui].end());
      }
      if (done || t >= budget) {
        for (int i = 0; i < n; ++i) ep.role.push_back(role[static_cast<std::size_t>(i)]);
        break;
      }
      const double eps = epsilon_at(ts, steps_ + t - ts.t_e);
      std::vector<int> joint(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        selector_->advance(obs[ui], prev[ui], i, sel_h[ui]);
        if (t % ts.role_interval == 0) {
          role[ui] = selector_->choose_role(sel_h[ui], eps, act_rng_);
          ++fires[static_cast<std::size_t>(role[ui])];
        }
        ep.role.push_back(role[ui]);
        joint[ui] = policies_->act(obs[ui], prev[ui], i, role[ui], avail[ui], pol_h[ui], eps,
                                   act_rng_);
        ep.action.push_back(joint[ui]);
      }
      const StepResult sr = env_->step(joint);
      ep.reward.push_back(sr.reward);
      ep.terminated.push_back(sr.done && !sr.timeout ? 1 : 0);
      prev = joint;
      done = sr.done;
      won = sr.won;
      ++len;
    }
    ep.length = len;
    ep.won = done && won;
    return ep;
  }

  void run_phase1() {
    const TrainSettings& ts = cfg_.train;
    const bool skip_repr = cfg_.ablation.full_action_spaces && cfg_.ablation.conventional_q;
    while (steps_ < ts.t_e) {
      Episode ep =
          collect_random_episode(*env_, envseed_rng_.next_u64(), act_rng_, ts.t_e - steps_);
      const int len = ep.length;
      const double ep_return =
          std::accumulate(ep.reward.begin(), ep.reward.end(), 0.0);
      const bool won = ep.won;
      steps_ += len;
      ++episodes_;
      buffer_.push_episode(std::move(ep));
      json rec{{"step", steps_}, {"episode", episodes_}, {"phase", 1},
               {"length", len},  {"return", ep_return},  {"won", won}};
      if (!skip_repr) {
        const std::optional<double> loss = repr_->train_step(buffer_, ts.batch_size, sample_rng_);
        if (loss) {
          check_finite("repr_loss", *loss);
          rec["repr_loss"] = *loss;
        }
      }
      if (metrics_) metrics_->record(rec);
    }
  }

  void transition() {
    const EnvSpec& spec = env_->spec();
    const TrainSettings& ts = cfg_.train;
    const AblationFlags& ab = cfg_.ablation;
    const bool skip_repr = ab.full_action_spaces && ab.conventional_q;
    if (!skip_repr) table_ = repr_->freeze();
    if (ab.full_action_spaces)
      roles_ = init_roles(ts.clusters, spec.action_count);
    else if (ab.random_restricted)
      roles_ = random_roles(ts.clusters, spec.action_count, cluster_rng_);
    else if (ts.clusters == 1)
      roles_ = init_roles(1, spec.action_count);
    else
      roles_ = cluster_actions(table_, ts.clusters, cluster_rng_);
    selector_ = std::make_shared<SelectorLearner>(
        spec.obs_dim, spec.action_count, spec.n_agents, spec.state_dim, roles_, table_,
        selector_config_from(ts, ab, spec.gamma), init_rng_);
    policies_ = std::make_shared<RolePolicyLearner>(
        spec.obs_dim, spec.action_count, spec.n_agents, spec.state_dim, roles_, table_,
        policy_config_from(ts, ab, spec.gamma), init_rng_);
    selector_->sync_targets();
    policies_->sync_targets();
    role_counts_.assign(static_cast<std::size_t>(roles_.count()), 0);
    if (metrics_) {
      json sizes = json::array();
      for (int j = 0; j < roles_.count(); ++j) sizes.push_back(roles_.members(j).size());
      metrics_->record({{"step", steps_},
                        {"event", "phase_transition"},
                        {"roles", roles_.count()},
                        {"role_sizes", sizes}});
    }
  }

  void run_phase2() {
    const TrainSettings& ts = cfg_.train;
    const LoggingSettings& lg = cfg_.logging;
    std::int64_t next_eval = (steps_ / lg.eval_interval + 1) * lg.eval_interval;
    while (steps_ < ts.total_steps) {
      std::vector<std::int64_t> fires(static_cast<std::size_t>(roles_.count()), 0);
      Episode ep = roll_hierarchical(ts.total_steps - steps_, fires);
      const int len = ep.length;
      const double ep_return = std::accumulate(ep.reward.begin(), ep.reward.end(), 0.0);
      const bool won = ep.won;
      steps_ += len;
      ++episodes_;
      ++phase2_episodes_;
      std::int64_t decisions = 0;
      for (std::size_t j = 0; j < fires.size(); ++j) {
        role_counts_[j] += fires[j];
        decisions += fires[j];
      }
      buffer_.push_episode(std::move(ep));
      json rec{{"step", steps_},   {"episode", episodes_}, {"phase", 2},
               {"length", len},    {"return", ep_return},  {"won", won},
               {"epsilon", epsilon_at(ts, steps_ - ts.t_e)},
               {"role_fires", decisions},
               {"fallback", policies_->fallback_count()}};
      json freq = json::array();
      for (std::int64_t f : fires)
        freq.push_back(decisions > 0 ? static_cast<double>(f) / static_cast<double>(decisions)
                                     : 0.0);
      rec["role_freq"] = freq;
      if (buffer_.ready(ts.batch_size)) {
        const double policy_loss = policies_->train_step(buffer_.sample(ts.batch_size, sample_rng_));
        check_finite("policy_loss", policy_loss);
        ++policy_updates_;
        const double selector_loss =
            selector_->train_step(buffer_.sample(ts.batch_size, sample_rng_));
        check_finite("selector_loss", selector_loss);
        ++selector_updates_;
        rec["policy_loss"] = policy_loss;
        rec["selector_loss"] = selector_loss;
        if (phase2_episodes_ % ts.target_interval == 0) {
          selector_->sync_targets();
          policies_->sync_targets();
        }
      }
      if (metrics_) metrics_->record(rec);
      while (steps_ >= next_eval && next_eval < ts.total_steps) {
        const EvalStats es = evaluate_policy(*eval_env_, *selector_, *policies_,
                                             ts.role_interval, lg.eval_episodes, eval_rng_);
        if (metrics_) {
          metrics_->record({{"step", steps_},
                            {"event", "eval"},
                            {"eval_at", next_eval},
                            {"win_rate", es.win_rate},
                            {"mean_return", es.mean_return},
                            {"role_freq", es.role_freq}});
        }
        next_eval += lg.eval_interval;
        if (eval_hook_) eval_hook_(steps_);
      }
    }
  }

  TrainOutcome finish() {
    const TrainSettings& ts = cfg_.train;
    TrainOutcome out;
    out.final_eval = evaluate_policy(*eval_env_, *selector_, *policies_, ts.role_interval,
                                     cfg_.logging.eval_episodes, eval_rng_);
    if (metrics_) {
      metrics_->record({{"step", steps_},
                        {"event", "final"},
                        {"win_rate", out.final_eval.win_rate},
                        {"mean_return", out.final_eval.mean_return},
                        {"role_freq", out.final_eval.role_freq}});
    }
    out.table = table_;
    out.roles = roles_;
    out.selector = selector_;
    out.policies = policies_;
    out.env_steps = steps_;
    out.episodes = episodes_;
    out.phase2_episodes = phase2_episodes_;
    out.selector_updates = selector_updates_;
    out.policy_updates = policy_updates_;
    out.fallback_events = policies_->fallback_count();
    out.role_counts = role_counts_;
    return out;
  }

  ExperimentConfig cfg_;
  std::unique_ptr<Env> env_;
  std::unique_ptr<Env> eval_env_;
  Rng repr_rng_;
  Rng cluster_rng_;
  Rng init_rng_;
  Rng act_rng_;
  Rng sample_rng_;
  Rng envseed_rng_;
  Rng eval_rng_;
  ReplayBuffer buffer_;
  MetricsWriter* metrics_ = nullptr;
  std::function<void(std::int64_t)> eval_hook_;
  std::unique_ptr<ActionReprLearner> repr_;
  ActionReprTable table_;
  RoleSet roles_;
  std::shared_ptr<SelectorLearner> selector_;
  std::shared_ptr<RolePolicyLearner> policies_;
  std::int64_t steps_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t phase2_episodes_ = 0;
  std::int64_t selector_updates_ = 0;
  std::int64_t policy_updates_ = 0;
  std::vector<std::int64_t> role_counts_;
};

}  // namespace rode
