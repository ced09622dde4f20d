#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rode/env/effect_game.hpp"
#include "rode/env/env.hpp"
#include "rode/env/matrix_game.hpp"
#include "rode/env/skirmish.hpp"

namespace rode {

inline MatrixGameConfig matrix_preset() { return MatrixGameConfig{}; }

inline EffectGameConfig effect_preset() { return EffectGameConfig{}; }

/// Named skirmish scenarios.
///  - "skirmish-easy":   3 ranged allies vs 3 melee enemies, even footing.
///  - "skirmish-hard":   3 allies vs an 8-unit swarm in two speed tiers.
///                       Spread damage loses the attrition race; winning
///                       needs sustained focus fire plus kiting the slow
///                       tier, and the reward is dominated by kills and the
///                       win bonus rather than chip damage.
///  - "skirmish-source": transfer source, 3 enemies, enemy observation slots
///                       pinned to 3 so maps with more enemies share obs_dim.
///  - "skirmish-plus2":  the source scenario with two extra enemies.
inline SkirmishConfig skirmish_preset(const std::string& name) {
  if (name == "skirmish-easy") {
    SkirmishConfig c;
    c.width = 9;
    c.height = 7;
    c.n_allies = 3;
    c.ally_hp = 10.0;
    c.ally_damage = 2.0;
    c.ally_range = 2.5;
    c.enemy_groups = {{3, 1, 10.0, 2.0, 1.5, 2}};
    c.episode_limit = 30;
    return c;
  }
  if (name == "skirmish-hard") {
    SkirmishConfig c;
    c.width = 10;
    c.height = 7;
    c.n_allies = 3;
    c.ally_hp = 10.0;
    c.ally_damage = 2.5;
    c.ally_range = 2.9;
    c.enemy_groups = {
        {5, 1, 7.4, 2.2, 1.5, 2},  // grunts: slow push, die to one focused volley
        {5, 2, 5.0, 1.5, 1.5, 1},  // skirmishers: fast flankers
    };
    c.damage_weight = 0.25;  // the signal lives in kills and the win bonus
    c.episode_limit = 70;
    return c;
  }
  if (name == "skirmish-source") {
    SkirmishConfig c;
    c.width = 9;
    c.height = 7;
    c.n_allies = 3;
    c.ally_hp = 10.0;
    c.ally_damage = 2.5;
    c.ally_range = 2.5;
    c.enemy_groups = {{3, 1, 8.0, 2.0, 1.5, 2}};
    c.trunc_enemies = 3;
    c.episode_limit = 40;
    return c;
  }
  if (name == "skirmish-plus2") {
    SkirmishConfig c = skirmish_preset("skirmish-source");
    c.enemy_groups[0].count += 2;
    c.trunc_enemies = 3;
    return c;
  }
  throw std::runtime_error("unknown skirmish preset: " + name);
}

inline std::vector<std::string> env_names() {
  return {"matrix",         "effect",          "skirmish-easy",
          "skirmish-hard",  "skirmish-source", "skirmish-plus2"};
}

inline std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "matrix") return std::make_unique<MatrixGame>(matrix_preset());
  if (name == "effect") return std::make_unique<EffectGame>(effect_preset());
  for (const std::string& s :
       {std::string("skirmish-easy"), std::string("skirmish-hard"),
        std::string("skirmish-source"), std::string("skirmish-plus2")}) {
    if (name == s) return std::make_unique<Skirmish>(skirmish_preset(name));
  }
  throw std::runtime_error("unknown environment: " + name + " (known: matrix, effect, "
                           "skirmish-easy, skirmish-hard, skirmish-source, skirmish-plus2)");
}

}  // namespace rode
