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

#ifndef IMPACTLAB_SHAPING_REWARDS_HPP_
#define IMPACTLAB_SHAPING_REWARDS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace impactlab::shaping {

enum class ShapingMode { kBaseline, kIa, kEmurel };

inline std::string_view to_string(ShapingMode m) {
  switch (m) {
    case ShapingMode::kBaseline: return "baseline";
    case ShapingMode::kIa: return "ia";
    case ShapingMode::kEmurel: return "emurel";
  }
  return "?";
}

inline ShapingMode parse_mode(std::string_view s) {
  if (s == "baseline") return ShapingMode::kBaseline;
  if (s == "ia") return ShapingMode::kIa;
  if (s == "emurel") return ShapingMode::kEmurel;
  throw std::invalid_argument("unknown method '" + std::string(s) + "' (expected baseline|ia|emurel)");
}

// alpha_k / beta_k weigh disadvantageous / advantageous inequity.
// combine_alpha / combine_beta mix extrinsic and intrinsic reward.
struct ShapingConfig {
  ShapingMode mode = ShapingMode::kBaseline;
  double alpha_k = 0.0;
  double beta_k = 0.05;
  double lambda = 0.975;
  double gamma = 0.99;
  double combine_alpha = 1.0;
  double combine_beta = 1.0;

  void validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!unit(lambda) || !unit(gamma)) throw std::invalid_argument("shaping: lambda and gamma must lie in [0, 1]");
    if (!(alpha_k >= 0.0) || !(beta_k >= 0.0)) throw std::invalid_argument("shaping: alpha_k and beta_k must be >= 0");
    if (!std::isfinite(combine_alpha) || !std::isfinite(combine_beta)) {
      throw std::invalid_argument("shaping: combine_alpha/combine_beta must be finite");
    }
  }
};

struct ShapingState {
  std::vector<double> w;

  ShapingState() = default;
  explicit ShapingState(std::size_t n) : w(n, 0.0) {}
  void reset() { std::fill(w.begin(), w.end(), 0.0); }
};

// w_t = gamma * lambda * w_{t-1} + e_t, elementwise.
inline void update_smoothed(ShapingState& s, std::span<const double> e, double gamma, double lambda) {
  if (e.size() != s.w.size()) throw std::invalid_argument("update_smoothed: reward vector has wrong length");
  const double decay = gamma * lambda;
  for (std::size_t j = 0; j < e.size(); ++j) s.w[j] = decay * s.w[j] + e[j];
}

inline double ia_intrinsic(std::span<const double> w, std::size_t k, double alpha_k, double beta_k) {
  const std::size_t n = w.size();
  if (n < 2) throw std::invalid_argument("ia_intrinsic: needs at least 2 agents");
  if (k >= n) throw std::out_of_range("ia_intrinsic: agent index out of range");
  double envy = 0.0;
  double guilt = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == k) continue;
    envy += std::max(w[j] - w[k], 0.0);
    guilt += std::max(w[k] - w[j], 0.0);
  }
  const double m = static_cast<double>(n - 1);
  return -alpha_k / m * envy - beta_k / m * guilt;
}

// d_row[m] is agent k's impact weight for the m-th other agent (agents j != k
// in ascending order).
inline double emurel_intrinsic(std::span<const double> w, std::span<const double> d_row, std::size_t k, double alpha_k,
                               double beta_k) {
  const std::size_t n = w.size();
  if (n < 2) throw std::invalid_argument("emurel_intrinsic: needs at least 2 agents");
  if (k >= n) throw std::out_of_range("emurel_intrinsic: agent index out of range");
  if (d_row.size() != n - 1) throw std::invalid_argument("emurel_intrinsic: impact row must have N-1 entries");
  double envy = 0.0;
  double guilt = 0.0;
  std::size_t m = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == k) continue;
    const double d = d_row[m++];
    if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("emurel_intrinsic: impact outside [0, 1]");
    envy += std::max(d * w[j] - w[k], 0.0);
    guilt += std::max(w[k] - d * w[j], 0.0);
  }
  const double den = static_cast<double>(n - 1);
  return -alpha_k / den * envy - beta_k / den * guilt;
}

inline double reshape(double e, double i, double combine_alpha, double combine_beta) {
  return combine_alpha * e + combine_beta * i;
}

// 1 - sum_ij |R_i - R_j| / (2 N sum_i R_i). All-zero returns count as
// perfectly equal; negative entries are rejected.
inline double gini_equality(std::span<const double> returns) {
  if (returns.empty()) throw std::invalid_argument("gini_equality: empty return vector");
  double total = 0.0;
  for (double r : returns) {
    if (!(r >= 0.0)) throw std::invalid_argument("gini_equality: returns must be nonnegative");
    total += r;
  }
  if (total == 0.0) return 1.0;
  double diff = 0.0;
  for (double a : returns) {
    for (double b : returns) diff += std::abs(a - b);
  }
  return 1.0 - diff / (2.0 * static_cast<double>(returns.size()) * total);
}

struct ShapedStepRewards {
  std::vector<double> extrinsic;
  std::vector<double> intrinsic;
  std::vector<double> reshaped;
};

// Advances the smoothed rewards with e and returns (e, i, r) for every agent.
// `impacts` holds one normalized N-1 row per agent and is read only in
// emurel mode.
inline ShapedStepRewards shape_step(const ShapingConfig& cfg, ShapingState& state, std::span<const double> e,
                                    const std::vector<std::vector<double>>& impacts = {}) {
  const std::size_t n = e.size();
  update_smoothed(state, e, cfg.gamma, cfg.lambda);
  ShapedStepRewards out;
  out.extrinsic.assign(e.begin(), e.end());
  out.intrinsic.assign(n, 0.0);
  out.reshaped.assign(n, 0.0);
  if (cfg.mode == ShapingMode::kEmurel && impacts.size() != n) {
    throw std::invalid_argument("shape_step: emurel mode needs one impact row per agent");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (cfg.mode == ShapingMode::kIa) {
      out.intrinsic[k] = ia_intrinsic(state.w, k, cfg.alpha_k, cfg.beta_k);
    } else if (cfg.mode == ShapingMode::kEmurel) {
      out.intrinsic[k] = emurel_intrinsic(state.w, impacts[k], k, cfg.alpha_k, cfg.beta_k);
    }
    const double cb = cfg.mode == ShapingMode::kBaseline ? 0.0 : cfg.combine_beta;
    out.reshaped[k] = reshape(e[k], out.intrinsic[k], cfg.combine_alpha, cb);
  }
  return out;
}

}  // namespace impactlab::shaping

#endif  // IMPACTLAB_SHAPING_REWARDS_HPP_
