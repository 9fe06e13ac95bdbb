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

#ifndef IMPACTLAB_AGENT_POLICY_HPP_
#define IMPACTLAB_AGENT_POLICY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/agent/nets.hpp"
#include "impactlab/core/rng.hpp"
#include "impactlab/env/gridworld.hpp"
#include "impactlab/nn.hpp"

namespace impactlab::agent {

inline constexpr double kProbFloor = 1e-10;

// Recurrent state of one agent within one episode: v for the actor-critic,
// u for the MOA.
struct AgentMemory {
  nn::RecurrentState v;
  nn::RecurrentState u;
  std::uint64_t episode = 0;

  AgentMemory() = default;
  explicit AgentMemory(std::size_t units) : v(units), u(units) {}

  void begin_episode(std::uint64_t tag) {
    v.reset();
    u.reset();
    episode = tag;
  }
};

struct PolicyOutput {
  int action = 0;
  std::vector<double> probs;
  std::vector<double> log_probs;
  double value = 0.0;
};

// Same arithmetic as nn::log_softmax_blocks on a single block.
inline std::vector<double> log_softmax(std::span<const double> x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - lse;
  return y;
}

inline std::vector<double> encode_features(const nn::Conv2d& encoder, const env::Observation& obs) {
  if (encoder.in_channels() != env::kNumChannels) {
    throw nn::ShapeError("encode: observation channels do not match the encoder");
  }
  const std::vector<double> x = obs.dense();
  return nn::conv_infer(encoder, x, obs.view);
}

// Actor-critic step from precomputed features. Advances memory.v.
inline PolicyOutput act_features(const AgentNets& nets, std::span<const double> phi, AgentMemory& memory,
                                 CounterRng& rng, bool greedy = false) {
  const auto h1 = nn::dense_infer(nets.ac_fc1, phi, nn::Activation::kRelu);
  const auto h2 = nn::dense_infer(nets.ac_fc2, h1, nn::Activation::kRelu);
  nn::lstm_infer(nets.ac_lstm, h2, memory.v);
  const auto logits = nn::dense_infer(nets.policy_head, memory.v.hidden, nn::Activation::kLinear);
  for (double l : logits) {
    if (!std::isfinite(l)) throw nn::NumericError("act: non-finite policy logits");
  }
  PolicyOutput out;
  out.log_probs = log_softmax(logits);
  out.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.probs[i] = std::exp(out.log_probs[i]);
  out.value = nn::dense_infer(nets.value_head, memory.v.hidden, nn::Activation::kLinear)[0];
  if (greedy) {
    out.action = static_cast<int>(std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
  } else {
    out.action = static_cast<int>(rng.categorical(out.probs));
  }
  return out;
}

inline PolicyOutput act(const AgentNets& nets, const env::Observation& obs, AgentMemory& memory, CounterRng& rng,
                        bool greedy = false) {
  const auto phi = encode_features(nets.encoder, obs);
  return act_features(nets, phi, memory, rng, greedy);
}

// One-hot encoding of a joint action, N blocks of |A|. Negative entries leave
// their block at zero (no previous action at episode start).
inline std::vector<double> joint_one_hot(std::span<const int> joint, std::size_t num_agents, std::size_t num_actions) {
  if (joint.size() != num_agents) {
    throw std::invalid_argument("joint action has " + std::to_string(joint.size()) + " entries, expected " +
                                std::to_string(num_agents));
  }
  std::vector<double> x(num_agents * num_actions, 0.0);
  for (std::size_t j = 0; j < num_agents; ++j) {
    if (joint[j] < 0) continue;
    if (static_cast<std::size_t>(joint[j]) >= num_actions) throw std::out_of_range("joint action index out of range");
    x[j * num_actions + static_cast<std::size_t>(joint[j])] = 1.0;
  }
  return x;
}

// MOA step from precomputed features and the previous joint action.
// Advances memory.u; returns N-1 distributions over the other agents' actions
// (agents j != self in ascending order).
inline std::vector<double> moa_predict_features(const AgentNets& nets, std::span<const double> phi,
                                                std::span<const int> prev_joint, AgentMemory& memory) {
  const auto onehot = joint_one_hot(prev_joint, nets.spec.num_agents, nets.spec.num_actions);
  const auto h1 = nn::dense_infer(nets.moa_fc1, phi, nn::Activation::kRelu);
  auto x = nn::dense_infer(nets.moa_fc2, h1, nn::Activation::kRelu);
  x.insert(x.end(), onehot.begin(), onehot.end());
  nn::lstm_infer(nets.moa_lstm, x, memory.u);
  const auto logits = nn::dense_infer(nets.moa_head, memory.u.hidden, nn::Activation::kLinear);
  return nn::softmax_blocks(logits, nets.spec.num_actions);
}

inline std::vector<double> moa_predict(const AgentNets& nets, const env::Observation& obs,
                                       std::span<const int> prev_joint, AgentMemory& memory) {
  const auto phi = encode_features(nets.encoder, obs);
  return moa_predict_features(nets, phi, prev_joint, memory);
}

// Mean cross-entropy over the N-1 predicted distributions.
inline double moa_loss(std::span<const double> predicted, std::span<const int> actual, std::size_t num_actions) {
  if (actual.empty() || predicted.size() != actual.size() * num_actions) {
    throw std::invalid_argument("moa_loss: " + std::to_string(predicted.size()) + " probabilities for " +
                                std::to_string(actual.size()) + " agents x " + std::to_string(num_actions) +
                                " actions");
  }
  double loss = 0.0;
  for (std::size_t m = 0; m < actual.size(); ++m) {
    if (actual[m] < 0 || static_cast<std::size_t>(actual[m]) >= num_actions) {
      throw std::out_of_range("moa_loss: action index out of range");
    }
    loss -= std::log(std::max(predicted[m * num_actions + static_cast<std::size_t>(actual[m])], kProbFloor));
  }
  return loss / static_cast<double>(actual.size());
}

// ---- batched training graphs ----

// T x B sequences stored time-major: row t*B + b is step t of sequence b.
struct SequenceInputs {
  std::size_t steps = 0;
  std::size_t batch = 0;
  nn::Tensor observations;  // [T*B, V, V, C]
  nn::Tensor ac_state;      // [B, 2u]
  nn::Tensor moa_state;     // [B, 2u]
  nn::Tensor prev_joint;    // [T*B, N*|A|]
};

struct SequenceOutputs {
  nn::NodeId phi;
  nn::NodeId policy_logp;  // [T*B, |A|]
  nn::NodeId value;        // [T*B, 1]
  nn::NodeId moa_logp;     // [T*B, (N-1)*|A|], valid when with_moa
  nn::NodeId moa_hidden;   // [T*B, u], valid when with_moa
};

// Unrolls `cell` over T steps of batch B; returns hidden outputs [T*B, u].
inline nn::NodeId unroll_lstm(nn::Graph& g, const nn::Lstm& cell, nn::NodeId x, nn::NodeId state, std::size_t steps,
                              std::size_t batch) {
  const std::size_t u = cell.units();
  std::vector<nn::NodeId> hs;
  hs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    state = cell(g, nn::slice_rows(g, x, t * batch, (t + 1) * batch), state);
    hs.push_back(nn::slice_cols(g, state, 0, u));
  }
  return steps == 1 ? hs[0] : nn::concat_rows(g, hs);
}

inline nn::NodeId encode_graph(nn::Graph& g, const nn::Conv2d& encoder, const nn::Tensor& observations) {
  return nn::flatten_rows(g, encoder(g, g.input(observations)));
}

inline SequenceOutputs build_sequence(nn::Graph& g, const AgentNets& nets, const SequenceInputs& in, bool with_moa) {
  using nn::Activation;
  SequenceOutputs out;
  out.phi = encode_graph(g, nets.encoder, in.observations);
  nn::NodeId h = nets.ac_fc2(g, nets.ac_fc1(g, out.phi, Activation::kRelu), Activation::kRelu);
  nn::NodeId hv = unroll_lstm(g, nets.ac_lstm, h, g.input(in.ac_state), in.steps, in.batch);
  out.policy_logp = nn::log_softmax_blocks(g, nets.policy_head(g, hv, Activation::kLinear), nets.spec.num_actions);
  out.value = nets.value_head(g, hv, Activation::kLinear);
  if (with_moa) {
    nn::NodeId m = nets.moa_fc2(g, nets.moa_fc1(g, out.phi, Activation::kRelu), Activation::kRelu);
    m = nn::concat_cols(g, {m, g.input(in.prev_joint)});
    out.moa_hidden = unroll_lstm(g, nets.moa_lstm, m, g.input(in.moa_state), in.steps, in.batch);
    out.moa_logp = nn::log_softmax_blocks(g, nets.moa_head(g, out.moa_hidden, Activation::kLinear),
                                          nets.spec.num_actions);
  }
  return out;
}

}  // namespace impactlab::agent

#endif  // IMPACTLAB_AGENT_POLICY_HPP_
