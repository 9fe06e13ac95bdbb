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

#ifndef IMPACTLAB_ENV_RENDER_HPP_
#define IMPACTLAB_ENV_RENDER_HPP_

// Text frames. The grid uses the map glyph legend with agent k drawn as the
// digit k; one footer line per agent follows, "<k> <N|E|S|W> <glyph under agent>".

#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "impactlab/env/gridworld.hpp"

namespace impactlab::env {

inline std::string render_ascii(const EnvState& s) {
  const int rows = s.rows();
  const int cols = s.cols();
  std::string out;
  out.reserve(static_cast<std::size_t>(rows) * (cols + 1) + s.agents.size() * 8);
  auto glyph = [&](std::size_t i) { return cell_glyph(s.grid[i], s.layout && s.layout->orchard[i]); };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      char g = glyph(i);
      for (std::size_t k = 0; k < s.agents.size(); ++k) {
        if (s.agents[k].pos == Position{r, c}) g = static_cast<char>('0' + k);
      }
      out.push_back(g);
    }
    out.push_back('\n');
  }
  for (std::size_t k = 0; k < s.agents.size(); ++k) {
    const auto& a = s.agents[k];
    out += std::to_string(k);
    out.push_back(' ');
    out.push_back(orientation_mark(a.orientation));
    out.push_back(' ');
    out.push_back(glyph(static_cast<std::size_t>(a.pos.row) * cols + a.pos.col));
    out.push_back('\n');
  }
  return out;
}

struct RenderedFrame {
  int rows = 0;
  int cols = 0;
  std::vector<Cell> grid;
  std::vector<AgentBody> agents;
};

inline RenderedFrame parse_render(std::string_view text) {
  RenderedFrame f;
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  std::size_t r = 0;
  // Grid glyphs never include spaces; footer lines always do.
  while (r < lines.size() && lines[r].find(' ') == std::string::npos) {
    if (lines[r].size() != lines[0].size()) throw ConfigError("render: ragged grid row");
    ++r;
  }
  f.rows = static_cast<int>(r);
  f.cols = f.rows ? static_cast<int>(lines[0].size()) : 0;
  std::vector<std::pair<std::size_t, Position>> digits;
  for (int i = 0; i < f.rows; ++i) {
    for (int c = 0; c < f.cols; ++c) {
      const char g = lines[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      if (g >= '0' && g <= '9') {
        digits.emplace_back(static_cast<std::size_t>(g - '0'), Position{i, c});
        f.grid.push_back(Cell::kEmpty);
        continue;
      }
      auto cell = glyph_cell(g);
      if (!cell) throw ConfigError("render: unknown glyph '" + std::string(1, g) + "'");
      f.grid.push_back(*cell);
    }
  }
  f.agents.resize(digits.size());
  for (const auto& [k, pos] : digits) {
    if (k >= f.agents.size()) throw ConfigError("render: agent digits are not contiguous");
    f.agents[k].pos = pos;
  }
  for (; r < lines.size(); ++r) {
    const auto& l = lines[r];
    if (l.size() != 5) throw ConfigError("render: malformed footer line '" + l + "'");
    const auto k = static_cast<std::size_t>(l[0] - '0');
    if (k >= f.agents.size()) throw ConfigError("render: footer for unknown agent");
    const auto o = std::string_view("NESW").find(l[2]);
    if (o == std::string_view::npos) throw ConfigError("render: bad orientation mark");
    f.agents[k].orientation = static_cast<Orientation>(o);
    auto cell = glyph_cell(l[4]);
    if (!cell) throw ConfigError("render: bad glyph under agent");
    f.grid[static_cast<std::size_t>(f.agents[k].pos.row) * f.cols + f.agents[k].pos.col] = *cell;
  }
  return f;
}

}  // namespace impactlab::env

#endif  // IMPACTLAB_ENV_RENDER_HPP_
