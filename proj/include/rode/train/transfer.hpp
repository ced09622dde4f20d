#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rode/roles/kmeans.hpp"
#include "rode/train/checkpoint.hpp"
#include "rode/train/trainer.hpp"

namespace rode {

/// Outcome of a zero-shot transfer run: how the carried-over hierarchy plays
/// on the target task, plus the mapping artifacts that produced it.
struct TransferReport {
  bool identity = false;  // target action set matched the source exactly
  EvalStats transferred;
  EvalStats random_baseline;
  ActionReprTable table;          // extended representation table
  RoleSet roles;                  // extended role factorization
  std::vector<int> fresh_labels;  // target-task co-clustering (empty for identity)
  std::int64_t repr_steps = 0;    // target-env steps spent on fresh representations
  std::shared_ptr<SelectorLearner> selector;
  std::shared_ptr<RolePolicyLearner> policies;
};

/// Rebuilds an encoder input weight [in, hidden] for an enlarged action set.
/// Rows follow the encoder layout: observation block, previous-action
/// one-hot block, agent-id one-hot block. Observation rows copy over (the
/// layouts must match), rows for new actions average the rows of the old
/// actions sharing their fresh cluster, and rows for new agent slots average
/// the old agent rows.
inline Tensor transfer_encoder_weight(const Tensor& old_w, const EncoderInputSpec& old_spec,
                                      const EncoderInputSpec& new_spec,
                                      const std::vector<std::vector<int>>& similar_old_actions) {
  if (old_spec.obs_dim != new_spec.obs_dim)
    throw std::runtime_error("transfer: observation layouts differ (" +
                             std::to_string(old_spec.obs_dim) + " vs " +
                             std::to_string(new_spec.obs_dim) + "); cannot carry the encoder");
  if (old_spec.prev_action != new_spec.prev_action || old_spec.agent_id != new_spec.agent_id)
    throw std::runtime_error("transfer: encoder input structure differs between checkpoints");
  if (old_w.shape().size() != 2 || old_w.shape()[0] != old_spec.dim())
    throw std::runtime_error("transfer: encoder weight does not match its input layout");
  if (new_spec.action_count < old_spec.action_count)
    throw std::runtime_error("transfer: target action set is smaller than the source");
  const int hidden = old_w.shape()[1];
  const int A_old = old_spec.action_count;
  const int A_new = new_spec.action_count;
  Tensor out = Tensor::zeros({new_spec.dim(), hidden});
  const auto old_row = [&](int r) { return old_w.data() + static_cast<std::size_t>(r) * hidden; };
  const auto new_row = [&](int r) { return out.data() + static_cast<std::size_t>(r) * hidden; };
  const auto copy_row = [&](int dst, int src) {
    std::copy(old_row(src), old_row(src) + hidden, new_row(dst));
  };
  const auto mean_rows = [&](int dst, const std::vector<int>& srcs) {
    double* d = new_row(dst);
    for (int src : srcs) {
      const double* s = old_row(src);
      for (int h = 0; h < hidden; ++h) d[static_cast<std::size_t>(h)] += s[static_cast<std::size_t>(h)];
    }
    for (int h = 0; h < hidden; ++h) d[static_cast<std::size_t>(h)] /= static_cast<double>(srcs.size());
  };

  for (int r = 0; r < old_spec.obs_dim; ++r) copy_row(r, r);
  int old_off = old_spec.obs_dim;
  int new_off = new_spec.obs_dim;
  if (new_spec.prev_action) {
    if (static_cast<int>(similar_old_actions.size()) != A_new - A_old)
      throw std::runtime_error("transfer: need one similar-action set per new action");
    for (int a = 0; a < A_old; ++a) copy_row(new_off + a, old_off + a);
    for (int a = A_old; a < A_new; ++a) {
      const std::vector<int>& sim = similar_old_actions[static_cast<std::size_t>(a - A_old)];
      if (sim.empty())
        throw std::runtime_error("transfer: new action " + std::to_string(a) +
                                 " has no similar source actions");
      std::vector<int> rows;
      rows.reserve(sim.size());
      for (int o : sim) {
        if (o < 0 || o >= A_old)
          throw std::runtime_error("transfer: similar-action index out of range");
        rows.push_back(old_off + o);
      }
      mean_rows(new_off + a, rows);
    }
    old_off += A_old;
    new_off += A_new;
  }
  if (new_spec.agent_id) {
    std::vector<int> old_agent_rows;
    for (int i = 0; i < old_spec.n_agents; ++i) old_agent_rows.push_back(old_off + i);
    for (int i = 0; i < new_spec.n_agents; ++i) {
      if (i < old_spec.n_agents)
        copy_row(new_off + i, old_off + i);
      else
        mean_rows(new_off + i, old_agent_rows);
    }
  }
  return out;
}

namespace detail {

/// Copies checkpoint parameters into a freshly sized learner, widening the
/// encoder input weight and skipping the mixer when the target state layout
/// differs (greedy execution never consults the mixer).
inline void assign_transferred(const NamedParams& dst, const NamedParams& src,
                               const EncoderInputSpec& old_spec, const EncoderInputSpec& new_spec,
                               const std::vector<std::vector<int>>& similar, bool skip_mixer,
                               const std::string& who) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, tensor] : src) by_name.emplace(name, &tensor);
  for (const auto& [name, tensor] : dst) {
    if (skip_mixer && name.rfind("mixer.", 0) == 0) {
      by_name.erase(name);
      continue;
    }
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("transfer: missing " + who + " parameter " + name);
    const Tensor& loaded = *it->second;
    if (name == "enc.fc.w" && loaded.shape() != tensor.shape()) {
      const Tensor widened = transfer_encoder_weight(loaded, old_spec, new_spec, similar);
      if (widened.shape() != tensor.shape())
        throw std::runtime_error("transfer: widened encoder weight has the wrong shape");
      std::copy(widened.data(), widened.data() + widened.numel(),
                const_cast<double*>(tensor.data()));
    } else {
      if (loaded.shape() != tensor.shape())
        throw std::runtime_error("transfer: shape mismatch for " + who + " parameter " + name);
      std::copy(loaded.data(), loaded.data() + loaded.numel(),
                const_cast<double*>(tensor.data()));
    }
    by_name.erase(it);
  }
  for (const auto& [name, tensor] : by_name) {
    (void)tensor;
    if (skip_mixer && name.rfind("mixer.", 0) == 0) continue;
    throw std::runtime_error("transfer: unexpected " + who + " parameter " + name);
  }
}

}  // namespace detail

/// Plays a trained hierarchy on a target task whose action set extends the
/// source's, without updating a single selector or policy weight. Fresh
/// action representations are learned on target-env random play, co-cluster
/// with the carried representations, and the mapping extends the table, the
/// roles, and the encoders' input layers. When the target action set matches
/// the source exactly the mapping is the identity and evaluation runs on the
/// restored learners as-is.
inline TransferReport run_transfer(const Checkpoint& ck, const std::string& env_name,
                                   int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::runtime_error("transfer: need at least one evaluation episode");
  ExperimentConfig cfg = parse_experiment_config(ck.config);
  if (cfg.ablation.conventional_q)
    throw std::runtime_error(
        "transfer: checkpoint uses conventional heads sized to a fixed action count; "
        "only representation-based heads can absorb new actions");
  if (ck.roles.count() < 1)
    throw std::runtime_error("transfer: checkpoint has no role factorization");
  if (!ck.table.defined())
    throw std::runtime_error("transfer: checkpoint has no action representations");

  const std::unique_ptr<Env> target = make_env(env_name);
  const EnvSpec& tspec = target->spec();
  const int A_old = ck.roles.action_count();
  const int A_new = tspec.action_count;

  TransferReport report;
  Rng eval_rng = Rng::stream(seed, "eval");
  Rng random_rng = Rng::stream(seed, "random");

  if (A_new == A_old) {
    // Identity mapping: the restored stack plays the target directly.
    RestoredStack stack = restore_learners(ck);
    report.identity = true;
    report.table = stack.table;
    report.roles = stack.roles;
    report.selector = stack.selector;
    report.policies = stack.policies;
    const std::unique_ptr<Env> source = make_configured_env(stack.config);
    if (source->spec().obs_dim != tspec.obs_dim || source->spec().n_agents != tspec.n_agents)
      throw std::runtime_error("transfer: target matches the action set but not the " +
                               std::string("observation/agent layout"));
    report.transferred = evaluate_policy(*target, *stack.selector, *stack.policies,
                                         stack.config.train.role_interval, episodes, eval_rng);
    report.random_baseline = evaluate_random(*target, episodes, random_rng);
    return report;
  }
  if (A_new < A_old)
    throw std::runtime_error("transfer: target action set (" + std::to_string(A_new) +
                             ") is smaller than the source's (" + std::to_string(A_old) + ")");

  // Fresh representations on the target task: random play for t_e steps.
  Rng repr_rng = Rng::stream(seed, "transfer-repr");
  Rng act_rng = Rng::stream(seed, "transfer-act");
  Rng envseed_rng = Rng::stream(seed, "transfer-envseed");
  Rng sample_rng = Rng::stream(seed, "transfer-sample");
  Rng cluster_rng = Rng::stream(seed, "transfer-cluster");
  ActionReprConfig rc;
  rc.dim = cfg.train.repr_dim;
  rc.hidden = cfg.train.repr_hidden;
  rc.lambda_reward = cfg.train.lambda_reward;
  rc.lr = cfg.train.learning_rate;
  rc.grad_clip = cfg.train.grad_clip;
  rc.count_encoding = cfg.train.count_encoding;
  ActionReprLearner fresh(A_new, tspec.obs_dim, tspec.n_agents, rc, repr_rng);
  ReplayBuffer buffer(cfg.train.buffer_capacity, tspec.episode_limit);
  while (report.repr_steps < cfg.train.t_e) {
    Episode ep = collect_random_episode(*target, envseed_rng.next_u64(), act_rng,
                                        cfg.train.t_e - report.repr_steps);
    report.repr_steps += ep.length;
    buffer.push_episode(std::move(ep));
    fresh.train_step(buffer, cfg.train.batch_size, sample_rng);
  }
  const ActionReprTable fresh_table = fresh.freeze();

  // Co-cluster every target action in the fresh space; old actions keep
  // their indices, so shared labels identify which source actions each new
  // one resembles.
  std::vector<std::vector<double>> points;
  points.reserve(static_cast<std::size_t>(A_new));
  for (int a = 0; a < A_new; ++a) points.push_back(fresh_table.row(a));
  const int k = std::min(cfg.train.clusters, A_new);
  if (k < 2) throw std::runtime_error("transfer: need at least two fresh clusters");
  report.fresh_labels = kmeans(points, k, cluster_rng).assignment;

  auto [ext_table, ext_roles] = map_new_actions(ck.table, ck.roles, report.fresh_labels, A_new);
  report.table = ext_table;
  report.roles = ext_roles;

  std::vector<std::vector<int>> similar(static_cast<std::size_t>(A_new - A_old));
  for (int a = A_old; a < A_new; ++a)
    for (int o = 0; o < A_old; ++o)
      if (report.fresh_labels[static_cast<std::size_t>(o)] ==
          report.fresh_labels[static_cast<std::size_t>(a)])
        similar[static_cast<std::size_t>(a - A_old)].push_back(o);

  // Size the learners for the target task and carry every weight across.
  const std::unique_ptr<Env> source = make_configured_env(cfg);
  const EnvSpec& sspec = source->spec();
  const bool skip_mixer = sspec.state_dim != tspec.state_dim;
  Rng scratch(0);
  report.selector = std::make_shared<SelectorLearner>(
      tspec.obs_dim, A_new, tspec.n_agents, tspec.state_dim, ext_roles, ext_table,
      selector_config_from(cfg.train, cfg.ablation, tspec.gamma), scratch);
  report.policies = std::make_shared<RolePolicyLearner>(
      tspec.obs_dim, A_new, tspec.n_agents, tspec.state_dim, ext_roles, ext_table,
      policy_config_from(cfg.train, cfg.ablation, tspec.gamma), scratch);

  const EncoderInputSpec sel_old{sspec.obs_dim, sspec.action_count, sspec.n_agents,
                                 cfg.train.recurrent_selector, cfg.train.recurrent_selector};
  const EncoderInputSpec pol_old{sspec.obs_dim, sspec.action_count, sspec.n_agents, true, true};
  detail::assign_transferred(report.selector->named_params(), ck.selector_params, sel_old,
                             report.selector->input_spec(), similar, skip_mixer, "selector");
  detail::assign_transferred(report.policies->named_params(), ck.policy_params, pol_old,
                             report.policies->input_spec(), similar, skip_mixer, "policy");
  report.selector->sync_targets();
  report.policies->sync_targets();

  // Zero-shot: evaluation only, no train_step ever runs on the carried heads.
  report.transferred = evaluate_policy(*target, *report.selector, *report.policies,
                                       cfg.train.role_interval, episodes, eval_rng);
  report.random_baseline = evaluate_random(*target, episodes, random_rng);
  return report;
}

}  // namespace rode
