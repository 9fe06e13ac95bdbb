// Copyright 2026 The impactlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IMPACTLAB_ENV_CONFIG_HPP_
#define IMPACTLAB_ENV_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace impactlab::env {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GameKind { kCleanup, kHarvest };

inline std::string_view to_string(GameKind k) { return k == GameKind::kCleanup ? "cleanup" : "harvest"; }

inline GameKind parse_game_kind(std::string_view s) {
  if (s == "cleanup") return GameKind::kCleanup;
  if (s == "harvest") return GameKind::kHarvest;
  throw ConfigError("unknown environment kind '" + std::string(s) + "' (expected cleanup|harvest)");
}

// Map glyph legend (one glyph per cell, one row per line):
//   #  wall              .  empty floor          P  agent spawn point
//   A  apple             a  apple regrowth point currently without an apple
//   ~  river             W  river cell covered by waste (Cleanup only)
// Every A and a cell is an apple regrowth point. Every ~ and W cell belongs
// to the river area that waste density is measured over.
enum class Cell : std::uint8_t { kEmpty, kWall, kApple, kRiver, kWaste, kSpawn };

enum class Orientation : std::uint8_t { kNorth, kEast, kSouth, kWest };

inline char orientation_mark(Orientation o) { return "NESW"[static_cast<int>(o)]; }

// Moves are egocentric: "up" is the direction the agent faces.
enum class Action : std::uint8_t {
  kMoveUp = 0,
  kMoveDown,
  kMoveLeft,
  kMoveRight,
  kTurnCw,
  kTurnCcw,
  kNoop,
  kFirePunish,
  kFireClean,  // Cleanup only
};

inline std::size_t num_actions(GameKind kind) { return kind == GameKind::kCleanup ? 9 : 8; }

inline std::string_view action_name(Action a) {
  static constexpr std::string_view kNames[] = {"move_up",   "move_down", "move_left",   "move_right", "turn_cw",
                                                "turn_ccw",  "noop",      "fire_punish", "fire_clean"};
  return kNames[static_cast<int>(a)];
}

struct CleanupDynamics {
  double depletion_threshold = 0.4;
  double max_apple_rate = 0.05;
  double waste_spawn_prob = 0.5;
};

struct HarvestDynamics {
  // Regrowth probability for 1-2, 3-4 and >=5 apples in the L1 radius-2 neighbourhood.
  double low = 0.01;
  double mid = 0.05;
  double high = 0.1;
};

struct BeamGeometry {
  int length = 5;
  int width = 3;  // odd
};

struct Rewards {
  double apple = 1.0;
  double fire_cost = -1.0;
  double hit = -50.0;
};

struct EnvConfig {
  GameKind kind = GameKind::kCleanup;
  std::string map;  // ASCII layout text
  std::size_t num_agents = 2;
  std::size_t episode_length = 1000;
  std::size_t view_size = 15;
  CleanupDynamics cleanup;
  HarvestDynamics harvest;
  BeamGeometry beam;
  // When set, reset() marks exactly round(fill * river cells) river cells as
  // waste (chosen with the episode RNG); otherwise the map's W glyphs are used.
  std::optional<double> initial_waste_fill;
  std::uint64_t seed = 0;
};

}  // namespace impactlab::env

#endif  // IMPACTLAB_ENV_CONFIG_HPP_
