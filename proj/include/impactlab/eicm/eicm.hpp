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

#ifndef IMPACTLAB_EICM_EICM_HPP_
#define IMPACTLAB_EICM_EICM_HPP_

// Curiosity-style feature models used to measure how much each fellow agent's
// action shaped an agent's next encoded observation.
//
// Forward model  f([phi_t | u_t | onehot(a_t)]) -> predicted phi_{t+1}
// Inverse model  g([phi_t | phi_{t+1} | u_t])    -> N action distributions
//
// u_t is the MOA hidden vector. Removing agent j means zeroing j's one-hot
// block at the forward model input (not substituting a noop).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/agent/policy.hpp"
#include "impactlab/core/rng.hpp"
#include "impactlab/nn.hpp"

namespace impactlab::eicm {

struct ForwardModel {
  std::size_t feature_size = 0;
  std::size_t state_size = 0;
  std::size_t num_agents = 0;
  std::size_t num_actions = 0;
  nn::Dense hidden;  // relu
  nn::Dense out;     // linear, q units

  ForwardModel() = default;
  ForwardModel(std::size_t q, std::size_t u, std::size_t n, std::size_t a, std::size_t hidden_units, CounterRng& rng)
      : feature_size(q), state_size(u), num_agents(n), num_actions(a),
        hidden("hidden", q + u + n * a, hidden_units, rng), out("out", hidden_units, q, rng) {}

  std::size_t input_size() const { return feature_size + state_size + num_agents * num_actions; }
  nn::ParameterRefs parameters() { return nn::concat_refs({hidden.parameters(), out.parameters()}); }
};

struct InverseModel {
  std::size_t feature_size = 0;
  std::size_t state_size = 0;
  std::size_t num_agents = 0;
  std::size_t num_actions = 0;
  nn::Dense hidden;  // relu
  nn::Dense out;     // N * |A| logits

  InverseModel() = default;
  InverseModel(std::size_t q, std::size_t u, std::size_t n, std::size_t a, std::size_t hidden_units, CounterRng& rng)
      : feature_size(q), state_size(u), num_agents(n), num_actions(a),
        hidden("hidden", 2 * q + u, hidden_units, rng), out("out", hidden_units, n * a, rng) {}

  nn::ParameterRefs parameters() { return nn::concat_refs({hidden.parameters(), out.parameters()}); }
};

struct ImpactRow {
  std::vector<double> raw;         // N-1 values, other agents in ascending order
  std::vector<double> normalized;  // in [0, 1]
};

inline std::vector<double> encode(const nn::Conv2d& encoder, const env::Observation& obs) {
  return agent::encode_features(encoder, obs);
}

namespace detail {

inline void check_inputs(const ForwardModel& fm, std::span<const double> phi, std::span<const double> u,
                         std::span<const int> joint) {
  if (phi.size() != fm.feature_size || u.size() != fm.state_size || joint.size() != fm.num_agents) {
    throw std::invalid_argument("forward model: expected features " + std::to_string(fm.feature_size) + ", state " +
                                std::to_string(fm.state_size) + ", " + std::to_string(fm.num_agents) +
                                " actions; got " + std::to_string(phi.size()) + ", " + std::to_string(u.size()) +
                                ", " + std::to_string(joint.size()));
  }
  for (int a : joint) {
    if (a < 0 || static_cast<std::size_t>(a) >= fm.num_actions) throw std::out_of_range("forward model: bad action");
  }
}

// Hidden pre-activation from the feature and state inputs only, accumulated
// in input order exactly as nn::dense_infer does.
inline std::vector<double> base_preactivation(const ForwardModel& fm, std::span<const double> phi,
                                              std::span<const double> u) {
  const std::size_t m = fm.hidden.out();
  const double* wp = fm.hidden.weight.value.data().data();
  std::vector<double> z(fm.hidden.bias.value.data().begin(), fm.hidden.bias.value.data().end());
  auto add_rows = [&](std::span<const double> x, std::size_t offset) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0.0) continue;
      const double* wr = wp + (offset + i) * m;
      for (std::size_t j = 0; j < m; ++j) z[j] += x[i] * wr[j];
    }
  };
  add_rows(phi, 0);
  add_rows(u, fm.feature_size);
  return z;
}

// Adds the one-hot action rows of every agent except `skip` (in agent order)
// and runs the rest of the network.
inline std::vector<double> finish(const ForwardModel& fm, std::vector<double> z, std::span<const int> joint,
                                  std::size_t skip) {
  const std::size_t m = fm.hidden.out();
  const double* wp = fm.hidden.weight.value.data().data();
  for (std::size_t j = 0; j < fm.num_agents; ++j) {
    if (j == skip) continue;
    const std::size_t row = fm.feature_size + fm.state_size + j * fm.num_actions + static_cast<std::size_t>(joint[j]);
    const double* wr = wp + row * m;
    for (std::size_t c = 0; c < m; ++c) z[c] += 1.0 * wr[c];
  }
  for (double& v : z) v = v > 0.0 ? v : 0.0;
  return nn::dense_infer(fm.out, z, nn::Activation::kLinear);
}

}  // namespace detail

inline std::vector<double> forward_predict(const ForwardModel& fm, std::span<const double> phi,
                                           std::span<const double> u, std::span<const int> joint) {
  detail::check_inputs(fm, phi, u, joint);
  return detail::finish(fm, detail::base_preactivation(fm, phi, u), joint, fm.num_agents);
}

inline std::vector<double> forward_predict_without(const ForwardModel& fm, std::span<const double> phi,
                                                   std::span<const double> u, std::span<const int> joint,
                                                   std::size_t j) {
  detail::check_inputs(fm, phi, u, joint);
  if (j >= fm.num_agents) throw std::out_of_range("forward_predict_without: agent index out of range");
  return detail::finish(fm, detail::base_preactivation(fm, phi, u), joint, j);
}

inline double half_squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("half_squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return 0.5 * s;
}

inline double compute_raw_impact(const ForwardModel& fm, std::span<const double> phi, std::span<const double> u,
                                 std::span<const int> joint, std::size_t j) {
  return half_squared_distance(forward_predict(fm, phi, u, joint), forward_predict_without(fm, phi, u, joint, j));
}

// Per-row min-max scaling; a row whose values are all equal maps to ones.
inline std::vector<double> normalize_impacts(std::span<const double> raw) {
  if (raw.empty()) throw std::invalid_argument("normalize_impacts: empty row");
  for (double x : raw) {
    if (!std::isfinite(x) || x < 0.0) throw std::invalid_argument("normalize_impacts: values must be finite and >= 0");
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(raw.size(), 1.0);
  if (hi > lo) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::clamp((raw[i] - lo) / (hi - lo), 0.0, 1.0);
  }
  return out;
}

// Impacts of every other agent on agent k's next features. The shared part of
// the first layer is computed once; each elimination only changes which
// action rows are added, so the result equals compute_raw_impact bit for bit.
inline ImpactRow impact_row(const ForwardModel& fm, std::span<const double> phi, std::span<const double> u,
                            std::span<const int> joint, std::size_t k) {
  detail::check_inputs(fm, phi, u, joint);
  if (k >= fm.num_agents) throw std::out_of_range("impact_row: agent index out of range");
  const auto base = detail::base_preactivation(fm, phi, u);
  const auto full = detail::finish(fm, base, joint, fm.num_agents);
  ImpactRow row;
  for (std::size_t j = 0; j < fm.num_agents; ++j) {
    if (j == k) continue;
    row.raw.push_back(half_squared_distance(full, detail::finish(fm, base, joint, j)));
  }
  row.normalized = normalize_impacts(row.raw);
  return row;
}

inline std::vector<double> inverse_predict(const InverseModel& im, std::span<const double> phi_prev,
                                           std::span<const double> phi_curr, std::span<const double> u) {
  if (phi_prev.size() != im.feature_size || phi_curr.size() != im.feature_size || u.size() != im.state_size) {
    throw std::invalid_argument("inverse_predict: input sizes do not match the model");
  }
  std::vector<double> x(phi_prev.begin(), phi_prev.end());
  x.insert(x.end(), phi_curr.begin(), phi_curr.end());
  x.insert(x.end(), u.begin(), u.end());
  const auto h = nn::dense_infer(im.hidden, x, nn::Activation::kRelu);
  return nn::softmax_blocks(nn::dense_infer(im.out, h, nn::Activation::kLinear), im.num_actions);
}

inline double forward_loss(std::span<const double> predicted, std::span<const double> actual) {
  return half_squared_distance(predicted, actual);
}

// -sum_j log p_j(actual_j), probabilities floored at 1e-10.
inline double inverse_loss(std::span<const double> predicted, std::span<const int> actual, std::size_t num_actions) {
  if (predicted.size() != actual.size() * num_actions) throw std::invalid_argument("inverse_loss: shape mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < actual.size(); ++j) {
    if (actual[j] < 0 || static_cast<std::size_t>(actual[j]) >= num_actions) {
      throw std::out_of_range("inverse_loss: action index out of range");
    }
    loss -= std::log(std::max(predicted[j * num_actions + static_cast<std::size_t>(actual[j])], agent::kProbFloor));
  }
  return loss;
}

// ---- batched training graphs ----

// Per-row 0.5 ||f(phi, u, a) - phi_next||^2, shape [B, 1]. `state` should
// already be gradient-stopped by the caller when it must not train the MOA.
inline nn::NodeId forward_loss_graph(nn::Graph& g, const ForwardModel& fm, nn::NodeId phi, nn::NodeId state,
                                     nn::NodeId joint_onehot, nn::NodeId phi_next) {
  nn::NodeId x = nn::concat_cols(g, {phi, state, joint_onehot});
  nn::NodeId pred = fm.out(g, fm.hidden(g, x, nn::Activation::kRelu), nn::Activation::kLinear);
  return nn::half_squared_distance(g, pred, phi_next);
}

// Per-row -sum_j log g_j(a_j), shape [B, 1].
inline nn::NodeId inverse_loss_graph(nn::Graph& g, const InverseModel& im, nn::NodeId phi, nn::NodeId phi_next,
                                     nn::NodeId state, std::vector<int> joint_targets) {
  nn::NodeId x = nn::concat_cols(g, {phi, phi_next, state});
  nn::NodeId logp = nn::log_softmax_blocks(
      g, im.out(g, im.hidden(g, x, nn::Activation::kRelu), nn::Activation::kLinear), im.num_actions);
  return nn::scale(g, nn::select_blocks(g, logp, im.num_actions, std::move(joint_targets)), -1.0);
}

}  // namespace impactlab::eicm

#endif  // IMPACTLAB_EICM_EICM_HPP_
