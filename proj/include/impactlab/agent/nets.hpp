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

#ifndef IMPACTLAB_AGENT_NETS_HPP_
#define IMPACTLAB_AGENT_NETS_HPP_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/core/rng.hpp"
#include "impactlab/nn.hpp"

namespace impactlab::agent {

struct AgentSpec {
  std::size_t num_agents = 2;
  std::size_t num_actions = 9;
  std::size_t view = 15;
  std::size_t channels = 8;
  std::size_t kernel = 3;
  std::size_t filters = 6;
  std::size_t fc_units = 32;
  std::size_t lstm_units = 128;

  std::size_t feature_side() const { return view - kernel + 1; }
  std::size_t feature_size() const { return feature_side() * feature_side() * filters; }
  std::size_t observation_size() const { return view * view * channels; }
  std::size_t joint_action_size() const { return num_agents * num_actions; }
  std::size_t moa_output_size() const { return (num_agents - 1) * num_actions; }

  void validate() const {
    if (num_agents < 2) throw std::invalid_argument("agent: at least 2 agents are required");
    if (num_actions < 2) throw std::invalid_argument("agent: at least 2 actions are required");
    if (view < kernel) throw std::invalid_argument("agent: view smaller than the encoder kernel");
    if (filters == 0 || fc_units == 0 || lstm_units == 0 || channels == 0) {
      throw std::invalid_argument("agent: layer sizes must be positive");
    }
  }
};

// Per-agent networks: the shared conv encoder, the actor-critic path and the
// model of other agents (MOA).
//
//   actor-critic: phi -> FC -> FC -> LSTM -> {policy logits, value}
//   MOA:          phi -> FC -> FC -> [. | one-hot previous joint action] -> LSTM -> (N-1) x |A| logits
struct AgentNets {
  AgentSpec spec;
  nn::Conv2d encoder;
  nn::Dense ac_fc1, ac_fc2;
  nn::Lstm ac_lstm;
  nn::Dense policy_head, value_head;
  nn::Dense moa_fc1, moa_fc2;
  nn::Lstm moa_lstm;
  nn::Dense moa_head;

  AgentNets() = default;
  AgentNets(const AgentSpec& s, CounterRng& rng) : spec(s) {
    spec.validate();
    const std::size_t q = spec.feature_size(), h = spec.fc_units, u = spec.lstm_units;
    encoder = nn::Conv2d("conv", spec.kernel, spec.channels, spec.filters, rng);
    ac_fc1 = nn::Dense("fc1", q, h, rng);
    ac_fc2 = nn::Dense("fc2", h, h, rng);
    ac_lstm = nn::Lstm("lstm", h, u, rng);
    // Small policy weights so the initial policy is close to uniform.
    policy_head = nn::Dense("policy", u, spec.num_actions, rng, 0.01);
    policy_head.bias.value.fill(0.0);
    value_head = nn::Dense("value", u, 1, rng);
    moa_fc1 = nn::Dense("fc1", q, h, rng);
    moa_fc2 = nn::Dense("fc2", h, h, rng);
    moa_lstm = nn::Lstm("lstm", h + spec.joint_action_size(), u, rng);
    moa_head = nn::Dense("head", u, spec.moa_output_size(), rng);
  }

  nn::ParameterRefs encoder_params() { return encoder.parameters(); }
  nn::ParameterRefs actor_critic_params() {
    return nn::concat_refs({ac_fc1.parameters(), ac_fc2.parameters(), ac_lstm.parameters(),
                            policy_head.parameters(), value_head.parameters()});
  }
  nn::ParameterRefs moa_params() {
    return nn::concat_refs({moa_fc1.parameters(), moa_fc2.parameters(), moa_lstm.parameters(), moa_head.parameters()});
  }
  nn::ParameterRefs parameters() { return nn::concat_refs({encoder_params(), actor_critic_params(), moa_params()}); }
};

}  // namespace impactlab::agent

#endif  // IMPACTLAB_AGENT_NETS_HPP_
