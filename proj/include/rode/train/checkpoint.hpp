#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rode/train/trainer.hpp"

namespace rode {

/// On-disk snapshot of a trained run: the fully resolved configuration, the
/// frozen action-representation table, the role factorization, and both
/// heads' parameters. The binary layout is fixed-endian and contains no
/// timestamps or addresses, so save -> load -> save reproduces the file byte
/// for byte.
struct Checkpoint {
  json config;  // fully resolved experiment configuration
  ActionReprTable table;
  RoleSet roles;
  NamedParams selector_params;
  NamedParams policy_params;
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'R', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t get_u32(std::istream& in) {
  char b[4];
  if (!in.read(b, 4)) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& in) {
  char b[8];
  if (!in.read(b, 8)) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void put_blob(std::ostream& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  const std::vector<int>& shape = t.shape();
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (int d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.numel(); ++i) put_f64(out, t.data()[i]);
}

inline std::pair<std::string, Tensor> get_blob(std::istream& in) {
  const std::uint32_t name_len = get_u32(in);
  if (name_len > 4096) throw std::runtime_error("checkpoint: implausible parameter name length");
  std::string name(name_len, '\0');
  if (name_len && !in.read(name.data(), name_len))
    throw std::runtime_error("checkpoint: truncated file");
  const std::uint32_t ndim = get_u32(in);
  if (ndim > 8) throw std::runtime_error("checkpoint: implausible tensor rank");
  std::vector<int> shape;
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = get_u32(in);
    if (d == 0 || d > (1u << 24)) throw std::runtime_error("checkpoint: implausible dimension");
    shape.push_back(static_cast<int>(d));
    numel *= d;
  }
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < numel; ++i) t.data()[i] = get_f64(in);
  return {std::move(name), std::move(t)};
}

/// Deep, untracked copies so the checkpoint stays stable if training resumes.
inline NamedParams snapshot_params(const NamedParams& live) {
  NamedParams out;
  out.reserve(live.size());
  for (const auto& [name, tensor] : live) {
    Tensor copy = Tensor::zeros(tensor.shape());
    std::copy(tensor.data(), tensor.data() + tensor.numel(), copy.data());
    out.emplace_back(name, std::move(copy));
  }
  return out;
}

/// Name-matched parameter load with exact-set semantics: every destination
/// name must appear in the snapshot and vice versa, with matching shapes.
inline void assign_params(const NamedParams& dst, const NamedParams& src, const std::string& who) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, tensor] : src) {
    if (!by_name.emplace(name, &tensor).second)
      throw std::runtime_error("checkpoint: duplicate " + who + " parameter " + name);
  }
  for (const auto& [name, tensor] : dst) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: missing " + who + " parameter " + name);
    if (it->second->shape() != tensor.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + who + " parameter " + name);
    std::copy(it->second->data(), it->second->data() + it->second->numel(),
              const_cast<double*>(tensor.data()));
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw std::runtime_error("checkpoint: unexpected " + who + " parameter " +
                             by_name.begin()->first);
}

}  // namespace detail

inline Checkpoint make_checkpoint(const ExperimentConfig& cfg, const TrainOutcome& outcome) {
  if (!outcome.selector || !outcome.policies)
    throw std::runtime_error("make_checkpoint: outcome has no trained learners");
  Checkpoint ck;
  ck.config = resolved_config_json(cfg);
  ck.table = outcome.table;
  ck.roles = outcome.roles;
  ck.selector_params = detail::snapshot_params(outcome.selector->named_params());
  ck.policy_params = detail::snapshot_params(outcome.policies->named_params());
  return ck;
}

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write(detail::kCheckpointMagic, 8);
  detail::put_u32(out, detail::kCheckpointVersion);
  const std::string config = ck.config.dump();
  detail::put_u64(out, config.size());
  out.write(config.data(), static_cast<std::streamsize>(config.size()));

  out.put(ck.table.defined() ? 1 : 0);
  if (ck.table.defined()) {
    detail::put_u32(out, static_cast<std::uint32_t>(ck.table.action_count()));
    detail::put_u32(out, static_cast<std::uint32_t>(ck.table.dim()));
    const Tensor& values = ck.table.values();
    for (std::size_t i = 0; i < values.numel(); ++i) detail::put_f64(out, values.data()[i]);
  }

  const bool has_roles = ck.roles.count() > 0;
  out.put(has_roles ? 1 : 0);
  if (has_roles) {
    detail::put_u32(out, static_cast<std::uint32_t>(ck.roles.action_count()));
    detail::put_u32(out, static_cast<std::uint32_t>(ck.roles.count()));
    for (int j = 0; j < ck.roles.count(); ++j) {
      const std::vector<int>& members = ck.roles.members(j);
      detail::put_u32(out, static_cast<std::uint32_t>(members.size()));
      for (int a : members) detail::put_u32(out, static_cast<std::uint32_t>(a));
    }
  }

  detail::put_u32(out, static_cast<std::uint32_t>(ck.selector_params.size()));
  for (const auto& [name, tensor] : ck.selector_params) detail::put_blob(out, name, tensor);
  detail::put_u32(out, static_cast<std::uint32_t>(ck.policy_params.size()));
  for (const auto& [name, tensor] : ck.policy_params) detail::put_blob(out, name, tensor);
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, detail::kCheckpointMagic))
    throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");
  const std::uint32_t version = detail::get_u32(in);
  if (version != detail::kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const std::uint64_t config_len = detail::get_u64(in);
  if (config_len > (1ull << 24)) throw std::runtime_error("checkpoint: implausible config size");
  std::string config(static_cast<std::size_t>(config_len), '\0');
  if (config_len && !in.read(config.data(), static_cast<std::streamsize>(config_len)))
    throw std::runtime_error("checkpoint: truncated file");
  try {
    ck.config = json::parse(config);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: embedded config unreadable: ") + e.what());
  }

  const int has_table = in.get();
  if (has_table != 0 && has_table != 1)
    throw std::runtime_error("checkpoint: truncated file");
  if (has_table) {
    const int action_count = static_cast<int>(detail::get_u32(in));
    const int dim = static_cast<int>(detail::get_u32(in));
    if (action_count < 1 || dim < 1 || action_count > (1 << 20) || dim > (1 << 20))
      throw std::runtime_error("checkpoint: implausible table size");
    Tensor values = Tensor::zeros({action_count, dim});
    for (std::size_t i = 0; i < values.numel(); ++i) values.data()[i] = detail::get_f64(in);
    ck.table = ActionReprTable(std::move(values), action_count, dim);
  }

  const int has_roles = in.get();
  if (has_roles != 0 && has_roles != 1)
    throw std::runtime_error("checkpoint: truncated file");
  if (has_roles) {
    const int action_count = static_cast<int>(detail::get_u32(in));
    const int count = static_cast<int>(detail::get_u32(in));
    if (action_count < 1 || count < 1 || count > (1 << 16))
      throw std::runtime_error("checkpoint: implausible role section");
    std::vector<std::vector<int>> members(static_cast<std::size_t>(count));
    for (auto& role : members) {
      const std::uint32_t size = detail::get_u32(in);
      if (size == 0 || size > static_cast<std::uint32_t>(action_count))
        throw std::runtime_error("checkpoint: implausible role size");
      for (std::uint32_t i = 0; i < size; ++i)
        role.push_back(static_cast<int>(detail::get_u32(in)));
    }
    ck.roles = RoleSet(action_count, std::move(members));
  }

  const std::uint32_t n_selector = detail::get_u32(in);
  if (n_selector > (1u << 16)) throw std::runtime_error("checkpoint: implausible blob count");
  for (std::uint32_t i = 0; i < n_selector; ++i) ck.selector_params.push_back(detail::get_blob(in));
  const std::uint32_t n_policy = detail::get_u32(in);
  if (n_policy > (1u << 16)) throw std::runtime_error("checkpoint: implausible blob count");
  for (std::uint32_t i = 0; i < n_policy; ++i) ck.policy_params.push_back(detail::get_blob(in));
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  write_checkpoint(out, ck);
  if (!out) throw std::runtime_error("checkpoint: write to " + path + " failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_checkpoint(in);
}

/// A checkpoint rebuilt into live learners, ready for greedy rollouts.
struct RestoredStack {
  ExperimentConfig config;
  ActionReprTable table;
  RoleSet roles;
  std::shared_ptr<SelectorLearner> selector;
  std::shared_ptr<RolePolicyLearner> policies;
};

/// Reconstructs both hierarchy levels from a checkpoint. Network sizes come
/// from the embedded configuration's environment, parameters load by name
/// with exact-set checks, and targets sync to the loaded values.
inline RestoredStack restore_learners(const Checkpoint& ck) {
  RestoredStack stack;
  stack.config = parse_experiment_config(ck.config);
  stack.table = ck.table;
  stack.roles = ck.roles;
  if (stack.roles.count() < 1)
    throw std::runtime_error("checkpoint: no role factorization recorded (incomplete run?)");
  const std::unique_ptr<Env> env = make_configured_env(stack.config);
  const EnvSpec& spec = env->spec();
  if (stack.roles.action_count() != spec.action_count)
    throw std::runtime_error("checkpoint: role action count " +
                             std::to_string(stack.roles.action_count()) +
                             " does not match environment action count " +
                             std::to_string(spec.action_count));
  Rng scratch(0);  // overwritten below, any seed works
  stack.selector = std::make_shared<SelectorLearner>(
      spec.obs_dim, spec.action_count, spec.n_agents, spec.state_dim, stack.roles, stack.table,
      selector_config_from(stack.config.train, stack.config.ablation, spec.gamma), scratch);
  stack.policies = std::make_shared<RolePolicyLearner>(
      spec.obs_dim, spec.action_count, spec.n_agents, spec.state_dim, stack.roles, stack.table,
      policy_config_from(stack.config.train, stack.config.ablation, spec.gamma), scratch);
  detail::assign_params(stack.selector->named_params(), ck.selector_params, "selector");
  detail::assign_params(stack.policies->named_params(), ck.policy_params, "policy");
  stack.selector->sync_targets();
  stack.policies->sync_targets();
  return stack;
}

}  // namespace rode
