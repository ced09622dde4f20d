#pragma once

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rode/env/env.hpp"

namespace rode {

/// One-step cooperative matrix game. Observations and state are fixed zero
/// vectors; the shared reward is a table lookup on the joint action, with
/// unlisted entries defaulting to 0.
struct MatrixGameConfig {
  int n_agents = 2;
  int actions = 2;
  // Joint action (all agents' indices) -> payoff. The default is a climbing
  // structure: the optimum (0,0)=8 is guarded by the miscoordination
  // penalties -12, with a tempting safe corner (1,1)=6.
  std::map<std::vector<int>, double> payoff = {
      {{0, 0}, 8.0}, {{0, 1}, -12.0}, {{1, 0}, -12.0}, {{1, 1}, 6.0}};
  double gamma = 0.99;
};

class MatrixGame final : public Env {
 public:
  explicit MatrixGame(MatrixGameConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.n_agents <= 0 || cfg_.actions <= 0)
      throw std::runtime_error("MatrixGame: counts must be positive");
    for (const auto& [joint, r] : cfg_.payoff) {
      if (static_cast<int>(joint.size()) != cfg_.n_agents)
        throw std::runtime_error("MatrixGame: payoff key arity != n_agents");
      for (int a : joint)
        if (a < 0 || a >= cfg_.actions)
          throw std::runtime_error("MatrixGame: payoff key action out of range");
      (void)r;
    }
    best_payoff_ = optimal_return();
    spec_.n_agents = cfg_.n_agents;
    spec_.action_count = cfg_.actions;
    spec_.obs_dim = 1;
    spec_.state_dim = 1;
    spec_.episode_limit = 1;
    spec_.gamma = cfg_.gamma;
  }

  const EnvSpec& spec() const override { return spec_; }

  void reset(std::uint64_t) override { done_ = false; }

  std::vector<double> state() const override { return {0.0}; }
  std::vector<double> observe(int) const override { return {0.0}; }

  std::vector<std::uint8_t> available_actions(int) const override {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(cfg_.actions), 1);
  }

  StepResult step(const std::vector<int>& joint_action) override {
    if (done_) throw std::runtime_error("MatrixGame: episode already finished");
    check_joint_action(joint_action);
    StepResult r;
    auto it = cfg_.payoff.find(joint_action);
    r.reward = it == cfg_.payoff.end() ? 0.0 : it->second;
    r.done = true;
    r.won = r.reward >= best_payoff_;
    done_ = true;
    return r;
  }

  /// Exhaustive search over joint actions; the optimum every learner is
  /// measured against.
  double optimal_return() const {
    std::vector<int> joint(static_cast<std::size_t>(cfg_.n_agents), 0);
    double best = payoff_of(joint);
    while (advance(joint)) best = std::max(best, payoff_of(joint));
    return best;
  }

  /// Mean payoff over all joint actions (the uniform-random baseline).
  double random_policy_return() const {
    std::vector<int> joint(static_cast<std::size_t>(cfg_.n_agents), 0);
    double total = payoff_of(joint);
    std::size_t count = 1;
    while (advance(joint)) {
      total += payoff_of(joint);
      ++count;
    }
    return total / static_cast<double>(count);
  }

 private:
  double payoff_of(const std::vector<int>& joint) const {
    auto it = cfg_.payoff.find(joint);
    return it == cfg_.payoff.end() ? 0.0 : it->second;
  }

  bool advance(std::vector<int>& joint) const {
    for (std::size_t i = joint.size(); i-- > 0;) {
      if (++joint[i] < cfg_.actions) return true;
      joint[i] = 0;
    }
    return false;
  }

  MatrixGameConfig cfg_;
  EnvSpec spec_;
  bool done_ = false;
  double best_payoff_ = 0.0;
};

}  // namespace rode
