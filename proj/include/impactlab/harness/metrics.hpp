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


#ifndef IMPACTLAB_HARNESS_METRICS_HPP_
#define IMPACTLAB_HARNESS_METRICS_HPP_

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/harness/format.hpp"
#include "impactlab/train/trainer.hpp"

namespace impactlab::harness {

// One row per update. Empty cells are unset values.
inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "update",         "env_steps",       "episodes",     "collective",  "equality",    "apples",
      "clean_beams",    "punish_beams",    "extrinsic",    "intrinsic",   "reshaped",    "impact_mean",
      "impact_min",     "impact_max",      "impact_raw_mean", "policy_loss", "value_loss", "entropy",
      "moa_loss",       "forward_loss",    "inverse_loss", "grad_norm",   "clip_fraction", "eval_collective",
      "eval_equality"};
  return cols;
}

struct EvalPoint {
  double collective = 0.0;
  double equality = 0.0;
};

inline std::string metrics_header() {
  std::string s;
  for (const auto& c : metrics_columns()) s += (s.empty() ? "" : ",") + c;
  return s + "\n";
}

inline std::string metrics_row(const train::UpdateMetrics& m, const std::optional<EvalPoint>& eval) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  const std::vector<std::string> cells = {
      std::to_string(m.update),       std::to_string(m.env_steps),      std::to_string(m.episodes),
      opt(m.collective),              opt(m.equality),                  format_number(m.apples),
      format_number(m.clean_beams),   format_number(m.punish_beams),    format_number(m.extrinsic),
      format_number(m.intrinsic),     format_number(m.reshaped),        format_number(m.impact_mean),
      format_number(m.impact_min),    format_number(m.impact_max),      format_number(m.impact_raw_mean),
      format_number(m.losses.policy), format_number(m.losses.value),    format_number(m.losses.entropy),
      format_number(m.losses.moa),    format_number(m.losses.forward),  format_number(m.losses.inverse),
      format_number(m.losses.grad_norm), format_number(m.losses.clip_fraction),
      eval ? format_number(eval->collective) : std::string(), eval ? format_number(eval->equality) : std::string()};
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

// Column-major view of a metrics CSV.
struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;

  std::size_t index(const std::string& col) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == col) return i;
    }
    throw std::invalid_argument("metrics: missing column '" + col + "'");
  }
  std::optional<double> at(std::size_t row, const std::string& col) const { return rows[row][index(col)]; }
};

inline MetricsTable read_metrics(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read metrics '" + path.string() + "'");
  MetricsTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(f, line)) throw std::runtime_error("metrics '" + path.string() + "' is empty");
  t.columns = split(line);
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.columns.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.columns.size()) + " cells, got " + std::to_string(cells.size()));
    }
    std::vector<std::optional<double>> row;
    for (const auto& c : cells) {
      try {
        row.push_back(parse_number(c));
      } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct WindowMean {
  std::optional<double> collective;
  std::optional<double> equality;
  std::size_t episodes = 0;
  std::size_t rows = 0;
};

// Episode-weighted means over the rows whose env_steps lie within the last
// `last_steps` steps of the run.
inline WindowMean window_mean(const MetricsTable& t, std::size_t last_steps) {
  WindowMean w;
  if (t.rows.empty()) return w;
  const double final_steps = t.at(t.rows.size() - 1, "env_steps").value_or(0.0);
  const double cutoff = final_steps - static_cast<double>(last_steps);
  double coll = 0.0, eq = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!(t.at(r, "env_steps").value_or(0.0) > cutoff)) continue;
    ++w.rows;
    const double n = t.at(r, "episodes").value_or(0.0);
    const auto c = t.at(r, "collective"), e = t.at(r, "equality");
    if (n <= 0.0 || !c || !e) continue;
    coll += n * *c;
    eq += n * *e;
    w.episodes += static_cast<std::size_t>(n);
  }
  if (w.episodes > 0) {
    w.collective = coll / static_cast<double>(w.episodes);
    w.equality = eq / static_cast<double>(w.episodes);
  }
  return w;
}

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 for a single sample
  double band = 0.0;      // 1.96 * sqrt(variance / n)
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
  SampleStats s;
  s.n = xs.size();
  if (s.n == 0) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
    s.variance /= static_cast<double>(s.n - 1);
    s.band = 1.96 * std::sqrt(s.variance / static_cast<double>(s.n));
  }
  return s;
}

}  // namespace impactlab::harness

#endif  // IMPACTLAB_HARNESS_METRICS_HPP_
