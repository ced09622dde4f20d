#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rode/env/registry.hpp"

namespace rode {

using nlohmann::json;

/// Training-loop settings. Defaults mirror the standard preset; per-run
/// files override individual keys and everything else stays documented here.
struct TrainSettings {
  std::int64_t total_steps = 200000;
  std::int64_t t_e = 50000;  // phase-1 budget: representation learning ends here
  int role_interval = 5;     // c: steps between role selections
  int clusters = 3;          // k for action clustering (1 = single full role)
  int repr_dim = 20;         // d: action-representation width
  int repr_hidden = 64;
  double lambda_reward = 10.0;
  bool count_encoding = false;  // population-count encoding of other agents' actions
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t epsilon_anneal_steps = 50000;
  int batch_size = 32;
  int buffer_capacity = 5000;
  int target_interval = 200;  // episodes between target-network syncs
  double learning_rate = 5e-4;
  double grad_clip = 10.0;
  int hidden = 64;
  int mixer_embed = 32;
  bool recurrent_selector = true;
  bool conventional_discount = false;
  bool constrained_bootstrap = true;
};

/// Ablation switches. A = full_action_spaces, B = random_restricted,
/// C = conventional_q, D = full_action_spaces + conventional_q.
struct AblationFlags {
  bool full_action_spaces = false;
  bool random_restricted = false;
  bool conventional_q = false;
};

struct LoggingSettings {
  std::int64_t eval_interval = 10000;
  int eval_episodes = 32;
};

struct ExperimentConfig {
  int schema = 1;
  std::uint64_t seed = 1;
  std::string env_name = "effect";
  json env_overrides = json::object();  // validated per environment kind
  TrainSettings train;
  AblationFlags ablation;
  LoggingSettings logging;

  void validate() const {
    if (schema != 1)
      throw std::runtime_error("config: unsupported schema version " + std::to_string(schema));
    const TrainSettings& t = train;
    if (t.total_steps <= 0 || t.t_e <= 0 || t.role_interval < 1 || t.clusters < 1 ||
        t.repr_dim < 1 || t.repr_hidden < 1 || t.epsilon_anneal_steps <= 0 ||
        t.batch_size < 1 || t.buffer_capacity < 1 || t.target_interval < 1 ||
        t.learning_rate <= 0.0 || t.hidden < 1 || t.mixer_embed < 1 || t.lambda_reward < 0.0)
      throw std::runtime_error("config: train settings must be positive");
    if (t.t_e >= t.total_steps)
      throw std::runtime_error("config: t_e (" + std::to_string(t.t_e) +
                               ") must be below total_steps (" + std::to_string(t.total_steps) +
                               ")");
    if (t.epsilon_start < 0.0 || t.epsilon_start > 1.0 || t.epsilon_end < 0.0 ||
        t.epsilon_end > 1.0)
      throw std::runtime_error("config: epsilon bounds must lie in [0, 1]");
    if (t.batch_size > t.buffer_capacity)
      throw std::runtime_error("config: batch_size exceeds buffer_capacity");
    if (logging.eval_interval <= 0 || logging.eval_episodes < 1)
      throw std::runtime_error("config: logging settings must be positive");
    if (ablation.random_restricted && (ablation.full_action_spaces || ablation.conventional_q))
      throw std::runtime_error("config: random_restricted cannot combine with other flags");
  }
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!known.count(key))
      throw std::runtime_error("config: unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void read_field(const json& obj, const std::string& key, T& into, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::runtime_error("config: bad value for \"" + key + "\" in " + where + ": " +
                             e.what());
  }
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& doc) {
  if (!doc.is_object()) throw std::runtime_error("config: top level must be an object");
  detail::reject_unknown_keys(doc, {"schema", "seed", "env", "train", "ablation", "logging"},
                              "top level");
  ExperimentConfig cfg;
  detail::read_field(doc, "schema", cfg.schema, "top level");
  detail::read_field(doc, "seed", cfg.seed, "top level");

  if (doc.contains("env")) {
    const json& env = doc.at("env");
    if (!env.is_object()) throw std::runtime_error("config: \"env\" must be an object");
    if (!env.contains("name")) throw std::runtime_error("config: \"env\" needs a \"name\"");
    cfg.env_name = env.at("name").get<std::string>();
    // Environment-specific overrides, validated per kind.
    std::set<std::string> known = {"name"};
    if (cfg.env_name == "effect")
      known.insert({"n_agents", "groups", "actions_per_group", "obs_dim", "horizon",
                    "noise_rel"});
    detail::reject_unknown_keys(env, known, "env (" + cfg.env_name + ")");
    cfg.env_overrides = env;
    cfg.env_overrides.erase("name");
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    if (!t.is_object()) throw std::runtime_error("config: \"train\" must be an object");
    detail::reject_unknown_keys(
        t,
        {"total_steps", "t_e", "role_interval", "clusters", "repr_dim", "repr_hidden",
         "lambda_reward", "count_encoding", "epsilon_start", "epsilon_end",
         "epsilon_anneal_steps", "batch_size", "buffer_capacity", "target_interval",
         "learning_rate", "grad_clip", "hidden", "mixer_embed", "recurrent_selector",
         "conventional_discount", "constrained_bootstrap"},
        "train");
    TrainSettings& s = cfg.train;
    detail::read_field(t, "total_steps", s.total_steps, "train");
    detail::read_field(t, "t_e", s.t_e, "train");
    detail::read_field(t, "role_interval", s.role_interval, "train");
    detail::read_field(t, "clusters", s.clusters, "train");
    detail::read_field(t, "repr_dim", s.repr_dim, "train");
    detail::read_field(t, "repr_hidden", s.repr_hidden, "train");
    detail::read_field(t, "lambda_reward", s.lambda_reward, "train");
    detail::read_field(t, "count_encoding", s.count_encoding, "train");
    detail::read_field(t, "epsilon_start", s.epsilon_start, "train");
    detail::read_field(t, "epsilon_end", s.epsilon_end, "train");
    detail::read_field(t, "epsilon_anneal_steps", s.epsilon_anneal_steps, "train");
    detail::read_field(t, "batch_size", s.batch_size, "train");
    detail::read_field(t, "buffer_capacity", s.buffer_capacity, "train");
    detail::read_field(t, "target_interval", s.target_interval, "train");
    detail::read_field(t, "learning_rate", s.learning_rate, "train");
    detail::read_field(t, "grad_clip", s.grad_clip, "train");
    detail::read_field(t, "hidden", s.hidden, "train");
    detail::read_field(t, "mixer_embed", s.mixer_embed, "train");
    detail::read_field(t, "recurrent_selector", s.recurrent_selector, "train");
    detail::read_field(t, "conventional_discount", s.conventional_discount, "train");
    detail::read_field(t, "constrained_bootstrap", s.constrained_bootstrap, "train");
  }

  if (doc.contains("ablation")) {
    const json& a = doc.at("ablation");
    if (!a.is_object()) throw std::runtime_error("config: \"ablation\" must be an object");
    detail::reject_unknown_keys(a, {"full_action_spaces", "random_restricted", "conventional_q"},
                                "ablation");
    detail::read_field(a, "full_action_spaces", cfg.ablation.full_action_spaces, "ablation");
    detail::read_field(a, "random_restricted", cfg.ablation.random_restricted, "ablation");
    detail::read_field(a, "conventional_q", cfg.ablation.conventional_q, "ablation");
  }

  if (doc.contains("logging")) {
    const json& l = doc.at("logging");
    if (!l.is_object()) throw std::runtime_error("config: \"logging\" must be an object");
    detail::reject_unknown_keys(l, {"eval_interval", "eval_episodes"}, "logging");
    detail::read_field(l, "eval_interval", cfg.logging.eval_interval, "logging");
    detail::read_field(l, "eval_episodes", cfg.logging.eval_episodes, "logging");
  }

  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
  return parse_experiment_config(doc);
}

/// Fully resolved echo: every setting materialized, suitable for reparsing
/// into an equivalent configuration and for embedding in checkpoints.
inline json resolved_config_json(const ExperimentConfig& cfg) {
  json env = cfg.env_overrides;
  env["name"] = cfg.env_name;
  const TrainSettings& t = cfg.train;
  return json{
      {"schema", cfg.schema},
      {"seed", cfg.seed},
      {"env", env},
      {"train",
       {{"total_steps", t.total_steps},
        {"t_e", t.t_e},
        {"role_interval", t.role_interval},
        {"clusters", t.clusters},
        {"repr_dim", t.repr_dim},
        {"repr_hidden", t.repr_hidden},
        {"lambda_reward", t.lambda_reward},
        {"count_encoding", t.count_encoding},
        {"epsilon_start", t.epsilon_start},
        {"epsilon_end", t.epsilon_end},
        {"epsilon_anneal_steps", t.epsilon_anneal_steps},
        {"batch_size", t.batch_size},
        {"buffer_capacity", t.buffer_capacity},
        {"target_interval", t.target_interval},
        {"learning_rate", t.learning_rate},
        {"grad_clip", t.grad_clip},
        {"hidden", t.hidden},
        {"mixer_embed", t.mixer_embed},
        {"recurrent_selector", t.recurrent_selector},
        {"conventional_discount", t.conventional_discount},
        {"constrained_bootstrap", t.constrained_bootstrap}}},
      {"ablation",
       {{"full_action_spaces", cfg.ablation.full_action_spaces},
        {"random_restricted", cfg.ablation.random_restricted},
        {"conventional_q", cfg.ablation.conventional_q}}},
      {"logging",
       {{"eval_interval", cfg.logging.eval_interval},
        {"eval_episodes", cfg.logging.eval_episodes}}}};
}

/// Applies one of the named ablation variants to a base configuration.
inline void apply_variant(ExperimentConfig& cfg, char variant) {
  switch (variant) {
    case 'A':
      cfg.ablation = {true, false, false};
      break;
    case 'B':
      cfg.ablation = {false, true, false};
      break;
    case 'C':
      cfg.ablation = {false, false, true};
      break;
    case 'D':
      cfg.ablation = {true, false, true};
      break;
    default:
      throw std::runtime_error(std::string("unknown ablation variant: ") + variant +
                               " (expected A, B, C, or D)");
  }
  cfg.validate();
}

/// Instantiates the configured environment with overrides applied.
inline std::unique_ptr<Env> make_configured_env(const ExperimentConfig& cfg) {
  if (cfg.env_name == "effect") {
    EffectGameConfig ec = effect_preset();
    detail::read_field(cfg.env_overrides, "n_agents", ec.n_agents, "env");
    detail::read_field(cfg.env_overrides, "groups", ec.groups, "env");
    detail::read_field(cfg.env_overrides, "actions_per_group", ec.actions_per_group, "env");
    detail::read_field(cfg.env_overrides, "obs_dim", ec.obs_dim, "env");
    detail::read_field(cfg.env_overrides, "horizon", ec.horizon, "env");
    detail::read_field(cfg.env_overrides, "noise_rel", ec.noise_rel, "env");
    return std::make_unique<EffectGame>(ec);
  }
  return make_env(cfg.env_name);
}

}  // namespace rode
