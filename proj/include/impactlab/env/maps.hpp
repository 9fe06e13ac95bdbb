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

#ifndef IMPACTLAB_ENV_MAPS_HPP_
#define IMPACTLAB_ENV_MAPS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "impactlab/env/config.hpp"

namespace impactlab::env {

struct Position {
  int row = 0;
  int col = 0;
  bool operator==(const Position&) const = default;
};

// Static description of a map: the initial grid plus the fixed regrowth and
// river areas, which never change during an episode.
struct MapLayout {
  int rows = 0;
  int cols = 0;
  std::vector<Cell> cells;
  std::vector<std::uint8_t> orchard;  // apple regrowth points
  std::vector<std::uint8_t> river;    // river area (clean or wasted)
  std::vector<Position> spawns;       // row-major order

  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
  bool in_bounds(int r, int c) const { return r >= 0 && c >= 0 && r < rows && c < cols; }
  std::size_t river_cells() const {
    std::size_t n = 0;
    for (auto v : river) n += v;
    return n;
  }
};

inline char cell_glyph(Cell c, bool orchard = false) {
  switch (c) {
    case Cell::kEmpty: return orchard ? 'a' : '.';
    case Cell::kWall: return '#';
    case Cell::kApple: return 'A';
    case Cell::kRiver: return '~';
    case Cell::kWaste: return 'W';
    case Cell::kSpawn: return 'P';
  }
  return '?';
}

inline std::optional<Cell> glyph_cell(char g) {
  switch (g) {
    case '.': case 'a': return Cell::kEmpty;
    case '#': return Cell::kWall;
    case 'A': return Cell::kApple;
    case '~': return Cell::kRiver;
    case 'W': return Cell::kWaste;
    case 'P': return Cell::kSpawn;
    default: return std::nullopt;
  }
}

// Parses an ASCII map. Trailing '\r' and one trailing blank line are
// tolerated; anything else malformed throws ConfigError with line:col.
inline MapLayout parse_map(std::string_view text, GameKind kind) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ConfigError("map: empty layout");

  MapLayout m;
  m.rows = static_cast<int>(lines.size());
  m.cols = static_cast<int>(lines[0].size());
  if (m.cols == 0) throw ConfigError("map:1:1: empty row");
  for (int r = 0; r < m.rows; ++r) {
    const auto& line = lines[static_cast<std::size_t>(r)];
    if (static_cast<int>(line.size()) != m.cols) {
      throw ConfigError("map:" + std::to_string(r + 1) + ":1: row has " + std::to_string(line.size()) +
                        " cells, expected " + std::to_string(m.cols) + " (map must be rectangular)");
    }
    for (int c = 0; c < m.cols; ++c) {
      const char g = line[static_cast<std::size_t>(c)];
      auto cell = glyph_cell(g);
      const std::string where = "map:" + std::to_string(r + 1) + ":" + std::to_string(c + 1) + ": ";
      if (!cell) throw ConfigError(where + "unknown glyph '" + std::string(1, g) + "'");
      if (kind == GameKind::kHarvest && (*cell == Cell::kRiver || *cell == Cell::kWaste)) {
        throw ConfigError(where + "river/waste glyphs are not legal in a harvest map");
      }
      m.cells.push_back(*cell);
      m.orchard.push_back(g == 'A' || g == 'a');
      m.river.push_back(g == '~' || g == 'W');
      if (g == 'P') m.spawns.push_back({r, c});
    }
  }
  return m;
}

namespace maps {

inline constexpr std::string_view kCleanupMini =
    "##########\n"
    "#~~.P..aA#\n"
    "#W~....AA#\n"
    "#~W..P.aA#\n"
    "#~~.P..Aa#\n"
    "#W~....AA#\n"
    "#~~..P.aA#\n"
    "##########\n";

inline constexpr std::string_view kHarvestMini =
    "##########\n"
    "#P..A...P#\n"
    "#..AAA...#\n"
    "#...A..A.#\n"
    "#.....AAA#\n"
    "#.A....A.#\n"
    "#P......P#\n"
    "##########\n";

inline constexpr std::string_view kCleanupFull =
    "#########################\n"
    "#W~~WW..........aAaaAaaA#\n"
    "#~WW~W..........AaaAaaAa#\n"
    "#W~WW~....P..P..aaAaaAaa#\n"
    "#WW~~W..........aAaaAaaA#\n"
    "#~~WW~..........AaaAaaAa#\n"
    "#WW~WW....P..P..aaAaaAaa#\n"
    "#~WW~~..........aAaaAaaA#\n"
    "#W~~WW..........AaaAaaAa#\n"
    "#~WW~W....P..P..aaAaaAaa#\n"
    "#W~WW~..........aAaaAaaA#\n"
    "#WW~~W..........AaaAaaAa#\n"
    "#~~WW~....P..P..aaAaaAaa#\n"
    "#WW~WW..........aAaaAaaA#\n"
    "#~WW~~..........AaaAaaAa#\n"
    "#W~~WW....P..P..aaAaaAaa#\n"
    "#~WW~W..........aAaaAaaA#\n"
    "#########################\n";

inline constexpr std::string_view kHarvestFull =
    "#########################\n"
    "#P.....................P#\n"
    "#...A.......A.......A...#\n"
    "#..AAA.....AAA.....AAA..#\n"
    "#...A.......A.......A...#\n"
    "#.......................#\n"
    "#P..........P...........#\n"
    "#......A........A.......#\n"
    "#.....AAA......AAA......#\n"
    "#......A........A.......#\n"
    "#.........P.............#\n"
    "#......................P#\n"
    "#...A.......A.......A...#\n"
    "#..AAA.....AAA.....AAA..#\n"
    "#...A...A...A...A...A...#\n"
    "#......AAA.....AAA......#\n"
    "#P......A.......A......P#\n"
    "#########################\n";

struct Builtin {
  std::string_view name;
  std::string_view text;
};

inline constexpr Builtin kBuiltins[] = {
    {"cleanup_mini", kCleanupMini},
    {"harvest_mini", kHarvestMini},
    {"cleanup_full", kCleanupFull},
    {"harvest_full", kHarvestFull},
};

inline std::optional<std::string_view> builtin(std::string_view name) {
  for (const auto& b : kBuiltins) {
    if (b.name == name) return b.text;
  }
  return std::nullopt;
}

}  // namespace maps

}  // namespace impactlab::env

#endif  // IMPACTLAB_ENV_MAPS_HPP_
