#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rode {

/// Static description of a Dec-POMDP environment.
struct EnvSpec {
  int n_agents = 0;
  int action_count = 0;   // per-agent discrete actions, shared across agents
  int obs_dim = 0;
  int state_dim = 0;
  int episode_limit = 0;
  double gamma = 0.99;
  // Nearest-neighbor observation truncation (skirmish); -1 = no truncation.
  int trunc_allies = -1;
  int trunc_enemies = -1;
};

/// Outcome of one joint step. `done` marks the end of the episode for any
/// reason; `timeout` distinguishes the episode-limit cutoff, where value
/// targets should still bootstrap, from a true terminal state.
struct StepResult {
  double reward = 0.0;
  bool done = false;
  bool timeout = false;
  bool won = false;
};

/// Dec-POMDP interface: shared reward, per-agent observations and
/// availability masks, global state for centralized training.
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;

  /// Starts a fresh episode. Identical seeds reproduce identical episodes
  /// under identical joint actions.
  virtual void reset(std::uint64_t seed) = 0;

  virtual std::vector<double> state() const = 0;
  virtual std::vector<double> observe(int agent) const = 0;

  /// Availability mask over the shared action set (1 = selectable now).
  virtual std::vector<std::uint8_t> available_actions(int agent) const = 0;

  /// Advances dynamics by one joint action (one entry per agent). Actions
  /// must be available per the current masks.
  virtual StepResult step(const std::vector<int>& joint_action) = 0;

  void check_joint_action(const std::vector<int>& joint_action) const {
    const EnvSpec& s = spec();
    if (static_cast<int>(joint_action.size()) != s.n_agents)
      throw std::runtime_error("step: expected " + std::to_string(s.n_agents) + " actions, got " +
                               std::to_string(joint_action.size()));
    for (int i = 0; i < s.n_agents; ++i) {
      const int a = joint_action[static_cast<std::size_t>(i)];
      if (a < 0 || a >= s.action_count)
        throw std::runtime_error("step: action " + std::to_string(a) + " out of range for agent " +
                                 std::to_string(i));
      if (!available_actions(i)[static_cast<std::size_t>(a)])
        throw std::runtime_error("step: action " + std::to_string(a) +
                                 " unavailable for agent " + std::to_string(i) +
                                 " (mask it before selection)");
    }
  }
};

}  // namespace rode
