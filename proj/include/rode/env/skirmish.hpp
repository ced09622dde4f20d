#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rode/core/rng.hpp"
#include "rode/env/env.hpp"

namespace rode {

/// One enemy contingent sharing combat stats. `type` labels the one-hot in
/// observations and must be >= 1 (0 is the ally type). `move_period` p means
/// the unit may move only on steps where t % p == 0, giving slower contingents
/// for kiting structure.
struct EnemyGroup {
  int count = 1;
  int type = 1;
  double hp = 10.0;
  double damage = 2.0;
  double range = 1.5;
  int move_period = 1;
};

/// Grid combat scenario. Per-ally actions: 0 noop (dead only), 1 stop,
/// 2..5 move up/down/left/right, 6+j attack enemy j — so 6 + n_enemies in
/// total. Enemies follow a fixed deterministic rule: attack the nearest ally
/// in range, otherwise advance toward the nearest ally.
struct SkirmishConfig {
  int width = 9;
  int height = 7;
  int n_allies = 3;
  double ally_hp = 10.0;
  double ally_damage = 2.0;
  double ally_range = 2.5;
  std::vector<EnemyGroup> enemy_groups = {{3, 1, 10.0, 2.0, 1.5, 1}};
  double damage_weight = 1.0;
  double kill_bonus = 10.0;
  double win_bonus = 200.0;
  // Shared-reward normalization target: max achievable episode return.
  double max_return = 20.0;
  int episode_limit = 30;
  double gamma = 0.99;
  // Observation truncation to the nearest allies/enemies; -1 = include all.
  int trunc_allies = -1;
  int trunc_enemies = -1;
  // Spawn rectangles, inclusive cell ranges.
  int ally_x0 = 0, ally_x1 = 1, ally_y0 = 0, ally_y1 = 6;
  int enemy_x0 = 7, enemy_x1 = 8, enemy_y0 = 0, enemy_y1 = 6;
};

class Skirmish final : public Env {
 public:
  explicit Skirmish(SkirmishConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.n_allies <= 0 || cfg_.enemy_groups.empty())
      throw std::runtime_error("Skirmish: need at least one ally and one enemy group");
    if (cfg_.width < 2 || cfg_.height < 2)
      throw std::runtime_error("Skirmish: grid too small");
    n_enemies_ = 0;
    int max_type = 0;
    for (const EnemyGroup& g : cfg_.enemy_groups) {
      if (g.count <= 0 || g.type < 1 || g.hp <= 0.0 || g.move_period < 1)
        throw std::runtime_error("Skirmish: invalid enemy group");
      n_enemies_ += g.count;
      max_type = std::max(max_type, g.type);
    }
    n_types_ = max_type + 1;
    ally_slots_ = cfg_.trunc_allies < 0 ? cfg_.n_allies - 1
                                        : std::min(cfg_.trunc_allies, cfg_.n_allies - 1);
    enemy_slots_ =
        cfg_.trunc_enemies < 0 ? n_enemies_ : std::min(cfg_.trunc_enemies, n_enemies_);
    const int slot_dim = 4 + n_types_;  // valid, rel x, rel y, hp frac, type one-hot

    spec_.n_agents = cfg_.n_allies;
    spec_.action_count = 6 + n_enemies_;
    spec_.obs_dim = 3 + (ally_slots_ + enemy_slots_) * slot_dim;
    spec_.state_dim = (cfg_.n_allies + n_enemies_) * (3 + n_types_);
    spec_.episode_limit = cfg_.episode_limit;
    spec_.gamma = cfg_.gamma;
    spec_.trunc_allies = ally_slots_;
    spec_.trunc_enemies = enemy_slots_;

    double raw_max = cfg_.win_bonus + cfg_.kill_bonus * n_enemies_;
    for (const EnemyGroup& g : cfg_.enemy_groups)
      raw_max += cfg_.damage_weight * g.hp * g.count;
    reward_scale_ = cfg_.max_return / raw_max;
  }

  const EnvSpec& spec() const override { return spec_; }
  const SkirmishConfig& config() const { return cfg_; }
  int n_enemies() const { return n_enemies_; }
  double reward_scale() const { return reward_scale_; }

  void reset(std::uint64_t seed) override {
    Rng rng(seed);
    allies_.clear();
    enemies_.clear();
    spawn_units(rng);
    t_ = 0;
    done_ = false;
  }

  std::vector<double> state() const override {
    std::vector<double> s;
    s.reserve(static_cast<std::size_t>(spec_.state_dim));
    auto emit = [&](const Unit& u) {
      if (u.hp > 0.0) {
        s.push_back(u.hp / u.max_hp);
        s.push_back(static_cast<double>(u.x) / (cfg_.width - 1));
        s.push_back(static_cast<double>(u.y) / (cfg_.height - 1));
        for (int t = 0; t < n_types_; ++t) s.push_back(t == u.type ? 1.0 : 0.0);
      } else {
        for (int j = 0; j < 3 + n_types_; ++j) s.push_back(0.0);
      }
    };
    for (const Unit& u : allies_) emit(u);
    for (const Unit& u : enemies_) emit(u);
    return s;
  }

  std::vector<double> observe(int agent) const override {
    std::vector<double> o(static_cast<std::size_t>(spec_.obs_dim), 0.0);
    const Unit& self = allies_.at(static_cast<std::size_t>(agent));
    if (self.hp <= 0.0) return o;
    std::size_t w = 0;
    o[w++] = self.hp / self.max_hp;
    o[w++] = static_cast<double>(self.x) / (cfg_.width - 1);
    o[w++] = static_cast<double>(self.y) / (cfg_.height - 1);
    const int slot_dim = 4 + n_types_;

    auto fill_slots = [&](const std::vector<Unit>& units, bool skip_self_index, int skip_index,
                          int slots) {
      std::vector<std::pair<double, int>> order;
      for (int i = 0; i < static_cast<int>(units.size()); ++i) {
        if (skip_self_index && i == skip_index) continue;
        const Unit& u = units[static_cast<std::size_t>(i)];
        if (u.hp <= 0.0) continue;
        order.emplace_back(dist2(self, u), i);
      }
      std::sort(order.begin(), order.end());  // ties break by index ascending
      for (int k = 0; k < slots; ++k) {
        if (k < static_cast<int>(order.size())) {
          const Unit& u = units[static_cast<std::size_t>(order[static_cast<std::size_t>(k)].second)];
          o[w] = 1.0;
          o[w + 1] = static_cast<double>(u.x - self.x) / cfg_.width;
          o[w + 2] = static_cast<double>(u.y - self.y) / cfg_.height;
          o[w + 3] = u.hp / u.max_hp;
          o[w + 4 + static_cast<std::size_t>(u.type)] = 1.0;
        }
        w += static_cast<std::size_t>(slot_dim);
      }
    };
    fill_slots(allies_, true, agent, ally_slots_);
    fill_slots(enemies_, false, -1, enemy_slots_);
    return o;
  }

  std::vector<std::uint8_t> available_actions(int agent) const override {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(spec_.action_count), 0);
    const Unit& self = allies_.at(static_cast<std::size_t>(agent));
    if (self.hp <= 0.0) {
      m[0] = 1;  // noop only
      return m;
    }
    m[1] = 1;  // stop
    const int dx[] = {0, 0, -1, 1};
    const int dy[] = {-1, 1, 0, 0};
    for (int d = 0; d < 4; ++d) {
      const int nx = self.x + dx[d], ny = self.y + dy[d];
      if (nx >= 0 && nx < cfg_.width && ny >= 0 && ny < cfg_.height)
        m[static_cast<std::size_t>(2 + d)] = 1;
    }
    for (int j = 0; j < n_enemies_; ++j) {
      const Unit& e = enemies_[static_cast<std::size_t>(j)];
      if (e.hp > 0.0 && dist2(self, e) <= self.range * self.range)
        m[static_cast<std::size_t>(6 + j)] = 1;
    }
    return m;
  }

  StepResult step(const std::vector<int>& joint_action) override {
    if (done_) throw std::runtime_error("Skirmish: episode already finished");
    check_joint_action(joint_action);
    StepResult res;
    double raw = 0.0;

    // Ally moves resolve simultaneously, then ally attacks.
    const int dx[] = {0, 0, -1, 1};
    const int dy[] = {-1, 1, 0, 0};
    for (int i = 0; i < cfg_.n_allies; ++i) {
      Unit& u = allies_[static_cast<std::size_t>(i)];
      const int a = joint_action[static_cast<std::size_t>(i)];
      if (a >= 2 && a <= 5) {
        u.x += dx[a - 2];
        u.y += dy[a - 2];
      }
    }
    std::vector<double> incoming(static_cast<std::size_t>(n_enemies_), 0.0);
    for (int i = 0; i < cfg_.n_allies; ++i) {
      const int a = joint_action[static_cast<std::size_t>(i)];
      if (a >= 6) incoming[static_cast<std::size_t>(a - 6)] += allies_[static_cast<std::size_t>(i)].damage;
    }
    for (int j = 0; j < n_enemies_; ++j) {
      Unit& e = enemies_[static_cast<std::size_t>(j)];
      const double dmg = incoming[static_cast<std::size_t>(j)];
      if (dmg <= 0.0 || e.hp <= 0.0) continue;
      raw += cfg_.damage_weight * std::min(dmg, e.hp);
      e.hp -= dmg;
      if (e.hp <= 0.0) {
        e.hp = 0.0;
        raw += cfg_.kill_bonus;
      }
    }

    if (none_alive(enemies_)) {
      raw += cfg_.win_bonus;
      res.won = true;
      res.done = true;
    } else {
      enemy_turn();
      if (none_alive(allies_)) res.done = true;
    }

    ++t_;
    if (!res.done && t_ >= cfg_.episode_limit) {
      res.done = true;
      res.timeout = true;
    }
    done_ = res.done;
    res.reward = raw * reward_scale_;
    return res;
  }

 private:
  struct Unit {
    double hp = 0.0, max_hp = 1.0;
    int x = 0, y = 0;
    int type = 0;
    double damage = 0.0, range = 1.0;
    int move_period = 1;
  };

  static double dist2(const Unit& a, const Unit& b) {
    const double ddx = a.x - b.x, ddy = a.y - b.y;
    return ddx * ddx + ddy * ddy;
  }

  static bool none_alive(const std::vector<Unit>& units) {
    for (const Unit& u : units)
      if (u.hp > 0.0) return false;
    return true;
  }

  void spawn_units(Rng& rng) {
    auto place = [&](int x0, int x1, int y0, int y1, int count, std::vector<Unit>& out) {
      std::vector<std::pair<int, int>> cells;
      for (int x = x0; x <= x1; ++x)
        for (int y = y0; y <= y1; ++y) cells.emplace_back(x, y);
      if (static_cast<int>(cells.size()) < count)
        throw std::runtime_error("Skirmish: spawn area smaller than unit count");
      rng.shuffle(cells);
      for (int i = 0; i < count; ++i) {
        out[out.size() - static_cast<std::size_t>(count) + static_cast<std::size_t>(i)].x =
            cells[static_cast<std::size_t>(i)].first;
        out[out.size() - static_cast<std::size_t>(count) + static_cast<std::size_t>(i)].y =
            cells[static_cast<std::size_t>(i)].second;
      }
    };
    for (int i = 0; i < cfg_.n_allies; ++i) {
      Unit u;
      u.hp = u.max_hp = cfg_.ally_hp;
      u.type = 0;
      u.damage = cfg_.ally_damage;
      u.range = cfg_.ally_range;
      allies_.push_back(u);
    }
    place(cfg_.ally_x0, cfg_.ally_x1, cfg_.ally_y0, cfg_.ally_y1, cfg_.n_allies, allies_);
    for (const EnemyGroup& g : cfg_.enemy_groups) {
      for (int i = 0; i < g.count; ++i) {
        Unit u;
        u.hp = u.max_hp = g.hp;
        u.type = g.type;
        u.damage = g.damage;
        u.range = g.range;
        u.move_period = g.move_period;
        enemies_.push_back(u);
      }
    }
    place(cfg_.enemy_x0, cfg_.enemy_x1, cfg_.enemy_y0, cfg_.enemy_y1, n_enemies_, enemies_);
  }

  /// Fixed policy: attack the nearest living ally in range; otherwise, if
  /// this step is a movement step for the unit, advance one cell toward the
  /// nearest living ally (larger-axis first, x on ties). Attacks resolve
  /// simultaneously across enemies.
  void enemy_turn() {
    std::vector<double> incoming(static_cast<std::size_t>(cfg_.n_allies), 0.0);
    for (Unit& e : enemies_) {
      if (e.hp <= 0.0) continue;
      int target = -1;
      double best = 0.0;
      for (int i = 0; i < cfg_.n_allies; ++i) {
        const Unit& a = allies_[static_cast<std::size_t>(i)];
        if (a.hp <= 0.0) continue;
        const double d2 = dist2(e, a);
        if (target < 0 || d2 < best) {
          target = i;
          best = d2;
        }
      }
      if (target < 0) return;  // no allies alive
      if (best <= e.range * e.range) {
        incoming[static_cast<std::size_t>(target)] += e.damage;
      } else if (t_ % e.move_period == 0) {
        const Unit& a = allies_[static_cast<std::size_t>(target)];
        const int ddx = a.x - e.x, ddy = a.y - e.y;
        if (std::abs(ddx) >= std::abs(ddy) && ddx != 0)
          e.x += ddx > 0 ? 1 : -1;
        else if (ddy != 0)
          e.y += ddy > 0 ? 1 : -1;
      }
    }
    for (int i = 0; i < cfg_.n_allies; ++i) {
      Unit& a = allies_[static_cast<std::size_t>(i)];
      if (incoming[static_cast<std::size_t>(i)] > 0.0) {
        a.hp = std::max(0.0, a.hp - incoming[static_cast<std::size_t>(i)]);
      }
    }
  }

  SkirmishConfig cfg_;
  EnvSpec spec_;
  std::vector<Unit> allies_;
  std::vector<Unit> enemies_;
  int n_enemies_ = 0;
  int n_types_ = 0;
  int ally_slots_ = 0;
  int enemy_slots_ = 0;
  int t_ = 0;
  bool done_ = false;
  double reward_scale_ = 1.0;
};

}  // namespace rode
