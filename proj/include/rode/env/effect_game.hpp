#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rode/core/rng.hpp"
#include "rode/env/env.hpp"

namespace rode {

/// Synthetic environment with ground-truth action clusters. Actions are
/// partitioned into G groups; every action in group g shifts the acting
/// agent's observation by the same vector delta_g (plus Gaussian noise) and
/// contributes the same weight w_g to the shared reward. The partition is the
/// recovery target for clustering tests and is never exposed to learners.
struct EffectGameConfig {
  int n_agents = 2;
  int groups = 3;
  int actions_per_group = 4;
  int obs_dim = 3;
  int horizon = 20;
  double gamma = 0.99;
  // Per-group observation deltas [groups][obs_dim]; empty selects the default
  // scaled axis directions delta_g = 2 * e_{g mod obs_dim} * (1 + g/obs_dim).
  std::vector<std::vector<double>> deltas;
  // Per-group reward weights; empty selects defaults spread over [-1, 1].
  std::vector<double> weights;
  // Noise stddev = noise_rel * ||delta_g|| per observation component.
  double noise_rel = 0.05;
};

class EffectGame final : public Env {
 public:
  explicit EffectGame(EffectGameConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.groups <= 0 || cfg_.actions_per_group <= 0 || cfg_.n_agents <= 0 ||
        cfg_.obs_dim <= 0 || cfg_.horizon <= 0)
      throw std::runtime_error("EffectGame: counts must be positive");
    if (cfg_.deltas.empty()) {
      for (int g = 0; g < cfg_.groups; ++g) {
        std::vector<double> d(static_cast<std::size_t>(cfg_.obs_dim), 0.0);
        d[static_cast<std::size_t>(g % cfg_.obs_dim)] =
            2.0 * (1.0 + static_cast<double>(g / cfg_.obs_dim));
        cfg_.deltas.push_back(std::move(d));
      }
    }
    if (cfg_.weights.empty()) {
      for (int g = 0; g < cfg_.groups; ++g)
        cfg_.weights.push_back(-1.0 + 2.0 * g / std::max(1, cfg_.groups - 1));
    }
    if (static_cast<int>(cfg_.deltas.size()) != cfg_.groups ||
        static_cast<int>(cfg_.weights.size()) != cfg_.groups)
      throw std::runtime_error("EffectGame: deltas/weights must have one entry per group");
    for (const auto& d : cfg_.deltas)
      if (static_cast<int>(d.size()) != cfg_.obs_dim)
        throw std::runtime_error("EffectGame: delta dimension != obs_dim");

    spec_.n_agents = cfg_.n_agents;
    spec_.action_count = cfg_.groups * cfg_.actions_per_group;
    spec_.obs_dim = cfg_.obs_dim;
    spec_.state_dim = cfg_.obs_dim * cfg_.n_agents;
    spec_.episode_limit = cfg_.horizon;
    spec_.gamma = cfg_.gamma;
    obs_.assign(static_cast<std::size_t>(cfg_.n_agents),
                std::vector<double>(static_cast<std::size_t>(cfg_.obs_dim), 0.0));
  }

  const EnvSpec& spec() const override { return spec_; }

  int group_of(int action) const { return action / cfg_.actions_per_group; }

  /// Ground-truth labels (evaluation only).
  std::vector<int> ground_truth_partition() const {
    std::vector<int> labels(static_cast<std::size_t>(spec_.action_count));
    for (int a = 0; a < spec_.action_count; ++a)
      labels[static_cast<std::size_t>(a)] = group_of(a);
    return labels;
  }

  void reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    for (auto& o : obs_) std::fill(o.begin(), o.end(), 0.0);
    t_ = 0;
    done_ = false;
  }

  std::vector<double> state() const override {
    std::vector<double> s;
    s.reserve(static_cast<std::size_t>(spec_.state_dim));
    for (const auto& o : obs_) s.insert(s.end(), o.begin(), o.end());
    return s;
  }

  std::vector<double> observe(int agent) const override {
    return obs_.at(static_cast<std::size_t>(agent));
  }

  std::vector<std::uint8_t> available_actions(int) const override {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(spec_.action_count), 1);
  }

  StepResult step(const std::vector<int>& joint_action) override {
    if (done_) throw std::runtime_error("EffectGame: episode already finished");
    check_joint_action(joint_action);
    StepResult r;
    for (int i = 0; i < cfg_.n_agents; ++i) {
      const int g = group_of(joint_action[static_cast<std::size_t>(i)]);
      const std::vector<double>& d = cfg_.deltas[static_cast<std::size_t>(g)];
      double norm = 0.0;
      for (double v : d) norm += v * v;
      const double sigma = cfg_.noise_rel * std::sqrt(norm);
      auto& o = obs_[static_cast<std::size_t>(i)];
      for (int j = 0; j < cfg_.obs_dim; ++j) {
        o[static_cast<std::size_t>(j)] += d[static_cast<std::size_t>(j)];
        if (sigma > 0.0) o[static_cast<std::size_t>(j)] += rng_.normal(0.0, sigma);
      }
      r.reward += cfg_.weights[static_cast<std::size_t>(g)];
    }
    ++t_;
    if (t_ >= cfg_.horizon) {
      r.done = true;
      r.timeout = true;
      done_ = true;
    }
    return r;
  }

 private:
  EffectGameConfig cfg_;
  EnvSpec spec_;
  Rng rng_;
  std::vector<std::vector<double>> obs_;
  int t_ = 0;
  bool done_ = false;
};

}  // namespace rode
