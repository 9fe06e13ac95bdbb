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

#ifndef IMPACTLAB_ENV_GRIDWORLD_HPP_
#define IMPACTLAB_ENV_GRIDWORLD_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/core/rng.hpp"
#include "impactlab/env/config.hpp"
#include "impactlab/env/maps.hpp"

namespace impactlab::env {

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr std::size_t kMaxAgents = 10;  // agents render as single digits

struct AgentBody {
  Position pos;
  Orientation orientation = Orientation::kNorth;
  bool alive = true;
  bool operator==(const AgentBody&) const = default;
};

struct EnvState {
  std::shared_ptr<const MapLayout> layout;
  std::vector<Cell> grid;
  std::vector<AgentBody> agents;
  std::vector<std::uint8_t> beam;  // cells swept by a beam during the last step
  CounterRng rng;
  std::size_t t = 0;

  int rows() const { return layout ? layout->rows : 0; }
  int cols() const { return layout ? layout->cols : 0; }
  Cell at(int r, int c) const { return grid[static_cast<std::size_t>(r) * cols() + c]; }

  friend bool operator==(const EnvState& a, const EnvState& b) {
    return a.grid == b.grid && a.agents == b.agents && a.beam == b.beam && a.rng == b.rng && a.t == b.t;
  }
};

enum class EventKind : std::uint8_t { kAppleCollected, kBeamFired, kAgentHit, kWasteCleaned };

inline std::string_view event_name(EventKind k) {
  static constexpr std::string_view kNames[] = {"apple_collected", "beam_fired", "agent_hit", "waste_cleaned"};
  return kNames[static_cast<int>(k)];
}

// `agent` is the agent the value is credited to. For agent_hit, `other` is
// the firer; for beam_fired it is the Action that was fired.
struct Event {
  EventKind kind;
  std::size_t agent;
  int other = -1;
  Position cell;
  double value = 0.0;
};

struct StepOutcome {
  std::vector<double> extrinsic;
  std::vector<Event> events;
  std::size_t apples_spawned = 0;
  std::size_t waste_spawned = 0;
  bool done = false;
};

enum Channel : std::uint8_t {
  kChEmpty = 0,
  kChWall,
  kChApple,
  kChRiver,
  kChWaste,
  kChSelf,
  kChOtherAgent,
  kChBeam,
};
inline constexpr std::size_t kNumChannels = 8;

// view × view cells, each a bitmask over the 8 channels. Row 0 is the far
// edge ahead of the agent; the agent sits at (view/2, view/2).
struct Observation {
  std::size_t view = 0;
  std::vector<std::uint8_t> cells;

  bool has(std::size_t r, std::size_t c, Channel ch) const { return (cells[r * view + c] >> ch) & 1u; }

  // Dense HWC layout: out[(r*view + c)*8 + ch].
  void write(std::span<double> out) const {
    if (out.size() != cells.size() * kNumChannels) throw std::invalid_argument("observation: output size mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      for (std::size_t ch = 0; ch < kNumChannels; ++ch) out[i * kNumChannels + ch] = (cells[i] >> ch) & 1u;
    }
  }
  std::vector<double> dense() const {
    std::vector<double> out(cells.size() * kNumChannels);
    write(out);
    return out;
  }
  bool operator==(const Observation&) const = default;
};

inline double cleanup_spawn_rate(double waste_density, const CleanupDynamics& d = {}) {
  const double rate = d.max_apple_rate * std::max(0.0, d.depletion_threshold - waste_density) / d.depletion_threshold;
  return std::clamp(rate, 0.0, d.max_apple_rate);
}

inline double harvest_regrowth_prob(std::size_t neighbor_apples, const HarvestDynamics& d = {}) {
  if (neighbor_apples == 0) return 0.0;
  if (neighbor_apples <= 2) return d.low;
  if (neighbor_apples <= 4) return d.mid;
  return d.high;
}

namespace detail {

struct Dir {
  int dr;
  int dc;
};

inline Dir forward(Orientation o) {
  static constexpr Dir kDirs[] = {{-1, 0}, {0, 1}, {1, 0}, {0, -1}};
  return kDirs[static_cast<int>(o)];
}

inline Dir right_of(Orientation o) { return forward(static_cast<Orientation>((static_cast<int>(o) + 1) % 4)); }

inline bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace detail

inline MapLayout validate(const EnvConfig& c) {
  MapLayout m = parse_map(c.map, c.kind);
  if (c.num_agents == 0) throw ConfigError("env: num_agents must be positive");
  if (c.num_agents > kMaxAgents) throw ConfigError("env: at most 10 agents are supported");
  if (m.spawns.size() < c.num_agents) {
    throw ConfigError("env: map has " + std::to_string(m.spawns.size()) + " spawn points for " +
                      std::to_string(c.num_agents) + " agents");
  }
  if (c.episode_length == 0) throw ConfigError("env: episode_length must be positive");
  if (c.view_size == 0 || c.view_size % 2 == 0) throw ConfigError("env: view_size must be odd and positive");
  if (c.beam.length < 1 || c.beam.width < 1 || c.beam.width % 2 == 0) {
    throw ConfigError("env: beam length must be >= 1 and width odd >= 1");
  }
  const auto& cd = c.cleanup;
  if (!(cd.depletion_threshold > 0.0 && cd.depletion_threshold <= 1.0)) {
    throw ConfigError("env: depletion_threshold must lie in (0, 1]");
  }
  if (!detail::in_unit(cd.max_apple_rate) || !detail::in_unit(cd.waste_spawn_prob)) {
    throw ConfigError("env: cleanup rates must lie in [0, 1]");
  }
  const auto& hd = c.harvest;
  if (!detail::in_unit(hd.low) || !detail::in_unit(hd.mid) || !detail::in_unit(hd.high) || hd.low > hd.mid ||
      hd.mid > hd.high) {
    throw ConfigError("env: harvest rates must lie in [0, 1] and be nondecreasing");
  }
  if (c.initial_waste_fill) {
    if (c.kind != GameKind::kCleanup) throw ConfigError("env: initial_waste_fill only applies to cleanup");
    if (!detail::in_unit(*c.initial_waste_fill)) throw ConfigError("env: initial_waste_fill must lie in [0, 1]");
  }
  return m;
}

inline double waste_density(const EnvState& s) {
  std::size_t river = 0;
  std::size_t waste = 0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    river += s.layout->river[i];
    waste += s.grid[i] == Cell::kWaste;
  }
  return river == 0 ? 0.0 : static_cast<double>(waste) / static_cast<double>(river);
}

inline std::size_t count_cells(const EnvState& s, Cell c) {
  return static_cast<std::size_t>(std::count(s.grid.begin(), s.grid.end(), c));
}

class Gridworld {
 public:
  explicit Gridworld(EnvConfig config)
      : config_(std::move(config)), layout_(std::make_shared<const MapLayout>(validate(config_))) {}

  const EnvConfig& config() const { return config_; }
  const MapLayout& layout() const { return *layout_; }
  std::size_t num_agents() const { return config_.num_agents; }
  std::size_t num_actions() const { return env::num_actions(config_.kind); }
  std::size_t observation_size() const { return config_.view_size * config_.view_size * kNumChannels; }

  EnvState reset() const { return reset(config_.seed); }

  EnvState reset(std::uint64_t seed) const {
    EnvState s;
    s.layout = layout_;
    s.grid = layout_->cells;
    s.beam.assign(s.grid.size(), 0);
    s.rng = CounterRng(seed, 0x656e76ULL);
    if (config_.initial_waste_fill) {
      std::vector<std::size_t> river;
      for (std::size_t i = 0; i < s.grid.size(); ++i) {
        if (layout_->river[i]) river.push_back(i);
      }
      s.rng.shuffle(river);
      const auto n = static_cast<std::size_t>(std::llround(*config_.initial_waste_fill * static_cast<double>(river.size())));
      for (std::size_t j = 0; j < river.size(); ++j) s.grid[river[j]] = j < n ? Cell::kWaste : Cell::kRiver;
    }
    std::vector<Position> spawns = layout_->spawns;
    s.rng.shuffle(spawns);
    for (std::size_t k = 0; k < config_.num_agents; ++k) {
      s.agents.push_back({spawns[k], static_cast<Orientation>(s.rng.uniform_int(4)), true});
    }
    return s;
  }

  StepOutcome step(EnvState& s, std::span<const int> actions) const {
    const std::size_t n = s.agents.size();
    if (actions.size() != n) {
      throw std::invalid_argument("step: expected " + std::to_string(n) + " actions, got " +
                                  std::to_string(actions.size()));
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (actions[k] < 0 || static_cast<std::size_t>(actions[k]) >= num_actions()) {
        throw std::out_of_range("step: action " + std::to_string(actions[k]) + " for agent " + std::to_string(k) +
                                " is outside [0, " + std::to_string(num_actions()) + ")");
      }
    }
    if (s.t >= config_.episode_length) throw StateError("step: episode already finished");

    const MapLayout& m = *layout_;
    StepOutcome out;
    out.extrinsic.assign(n, 0.0);
    std::fill(s.beam.begin(), s.beam.end(), 0);

    // (1) beams
    for (std::size_t k = 0; k < n; ++k) {
      const auto a = static_cast<Action>(actions[k]);
      if (a != Action::kFirePunish && a != Action::kFireClean) continue;
      const AgentBody& body = s.agents[k];
      const double cost = a == Action::kFirePunish ? rewards_.fire_cost : 0.0;
      out.extrinsic[k] += cost;
      out.events.push_back({EventKind::kBeamFired, k, static_cast<int>(a), body.pos, cost});
      const auto f = detail::forward(body.orientation);
      const auto rt = detail::right_of(body.orientation);
      const int half = config_.beam.width / 2;
      for (int lane = -half; lane <= half; ++lane) {
        for (int d = 1; d <= config_.beam.length; ++d) {
          const int r = body.pos.row + d * f.dr + lane * rt.dr;
          const int c = body.pos.col + d * f.dc + lane * rt.dc;
          if (!m.in_bounds(r, c) || s.grid[m.index(r, c)] == Cell::kWall) break;
          s.beam[m.index(r, c)] = 1;
          if (a == Action::kFirePunish) {
            for (std::size_t j = 0; j < n; ++j) {
              if (j != k && s.agents[j].pos == Position{r, c}) {
                out.extrinsic[j] += rewards_.hit;
                out.events.push_back({EventKind::kAgentHit, j, static_cast<int>(k), {r, c}, rewards_.hit});
              }
            }
          } else if (s.grid[m.index(r, c)] == Cell::kWaste) {
            s.grid[m.index(r, c)] = Cell::kRiver;
            out.events.push_back({EventKind::kWasteCleaned, k, -1, {r, c}, 0.0});
          }
        }
      }
    }

    // (2) movement and turning, in a fresh random order
    for (std::size_t k : s.rng.permutation(n)) {
      AgentBody& body = s.agents[k];
      const auto a = static_cast<Action>(actions[k]);
      const auto f = detail::forward(body.orientation);
      const auto rt = detail::right_of(body.orientation);
      detail::Dir d{0, 0};
      switch (a) {
        case Action::kMoveUp: d = f; break;
        case Action::kMoveDown: d = {-f.dr, -f.dc}; break;
        case Action::kMoveLeft: d = {-rt.dr, -rt.dc}; break;
        case Action::kMoveRight: d = rt; break;
        case Action::kTurnCw: body.orientation = static_cast<Orientation>((static_cast<int>(body.orientation) + 1) % 4); continue;
        case Action::kTurnCcw: body.orientation = static_cast<Orientation>((static_cast<int>(body.orientation) + 3) % 4); continue;
        default: continue;
      }
      const Position to{body.pos.row + d.dr, body.pos.col + d.dc};
      if (!m.in_bounds(to.row, to.col) || s.grid[m.index(to.row, to.col)] == Cell::kWall) continue;
      bool occupied = false;
      for (std::size_t j = 0; j < n; ++j) occupied |= (j != k && s.agents[j].pos == to);
      if (!occupied) body.pos = to;
    }

    // (3) pickup
    std::vector<std::uint8_t> occupied(s.grid.size(), 0);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = m.index(s.agents[k].pos.row, s.agents[k].pos.col);
      occupied[i] = 1;
      if (s.grid[i] == Cell::kApple) {
        s.grid[i] = Cell::kEmpty;
        out.extrinsic[k] += rewards_.apple;
        out.events.push_back({EventKind::kAppleCollected, k, -1, s.agents[k].pos, rewards_.apple});
      }
    }

    // (4) regrowth, on unoccupied empty regrowth points
    if (config_.kind == GameKind::kCleanup) {
      const double p = cleanup_spawn_rate(waste_density(s), config_.cleanup);
      if (p > 0.0) {
        for (std::size_t i = 0; i < s.grid.size(); ++i) {
          if (m.orchard[i] && s.grid[i] == Cell::kEmpty && !occupied[i] && s.rng.uniform() < p) {
            s.grid[i] = Cell::kApple;
            ++out.apples_spawned;
          }
        }
      }
    } else {
      const std::vector<Cell> before = s.grid;
      for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
          const std::size_t i = m.index(r, c);
          if (!m.orchard[i] || s.grid[i] != Cell::kEmpty || occupied[i]) continue;
          std::size_t near = 0;
          for (int dr = -2; dr <= 2; ++dr) {
            for (int dc = -2 + std::abs(dr); dc <= 2 - std::abs(dr); ++dc) {
              if ((dr || dc) && m.in_bounds(r + dr, c + dc) && before[m.index(r + dr, c + dc)] == Cell::kApple) ++near;
            }
          }
          const double p = harvest_regrowth_prob(near, config_.harvest);
          if (p > 0.0 && s.rng.uniform() < p) {
            s.grid[i] = Cell::kApple;
            ++out.apples_spawned;
          }
        }
      }
    }

    // (5) waste
    if (config_.kind == GameKind::kCleanup && waste_density(s) < config_.cleanup.depletion_threshold &&
        s.rng.uniform() < config_.cleanup.waste_spawn_prob) {
      std::vector<std::size_t> clean;
      for (std::size_t i = 0; i < s.grid.size(); ++i) {
        if (s.grid[i] == Cell::kRiver) clean.push_back(i);
      }
      if (!clean.empty()) {
        s.grid[clean[s.rng.uniform_int(clean.size())]] = Cell::kWaste;
        ++out.waste_spawned;
      }
    }

    // (6)
    ++s.t;
    out.done = s.t >= config_.episode_length;
    return out;
  }

  StepOutcome step(EnvState& s, std::span<const Action> actions) const {
    std::vector<int> a(actions.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<int>(actions[i]);
    return step(s, std::span<const int>(a));
  }

  Observation observe(const EnvState& s, std::size_t k) const {
    if (k >= s.agents.size()) throw std::out_of_range("observe: agent index out of range");
    const MapLayout& m = *layout_;
    const std::size_t v = config_.view_size;
    const int half = static_cast<int>(v / 2);
    const AgentBody& body = s.agents[k];
    const auto f = detail::forward(body.orientation);
    const auto rt = detail::right_of(body.orientation);
    Observation o;
    o.view = v;
    o.cells.assign(v * v, 0);
    for (int vr = 0; vr < static_cast<int>(v); ++vr) {
      for (int vc = 0; vc < static_cast<int>(v); ++vc) {
        const int ahead = half - vr;
        const int side = vc - half;
        const int r = body.pos.row + ahead * f.dr + side * rt.dr;
        const int c = body.pos.col + ahead * f.dc + side * rt.dc;
        std::uint8_t bitsv = 0;
        if (!m.in_bounds(r, c)) {
          bitsv = 1u << kChWall;
        } else {
          const std::size_t i = m.index(r, c);
          switch (s.grid[i]) {
            case Cell::kEmpty:
            case Cell::kSpawn: bitsv = 1u << kChEmpty; break;
            case Cell::kWall: bitsv = 1u << kChWall; break;
            case Cell::kApple: bitsv = 1u << kChApple; break;
            case Cell::kRiver: bitsv = 1u << kChRiver; break;
            case Cell::kWaste: bitsv = 1u << kChWaste; break;
          }
          for (std::size_t j = 0; j < s.agents.size(); ++j) {
            if (s.agents[j].pos == Position{r, c}) bitsv |= 1u << (j == k ? kChSelf : kChOtherAgent);
          }
          if (s.beam[i]) bitsv |= 1u << kChBeam;
        }
        o.cells[static_cast<std::size_t>(vr) * v + vc] = bitsv;
      }
    }
    return o;
  }

 private:
  EnvConfig config_;
  std::shared_ptr<const MapLayout> layout_;
  Rewards rewards_;
};

}  // namespace impactlab::env

#endif  // IMPACTLAB_ENV_GRIDWORLD_HPP_
