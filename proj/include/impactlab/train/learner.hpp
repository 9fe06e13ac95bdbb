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

#ifndef IMPACTLAB_TRAIN_LEARNER_HPP_
#define IMPACTLAB_TRAIN_LEARNER_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "impactlab/agent.hpp"
#include "impactlab/core/rng.hpp"
#include "impactlab/eicm.hpp"
#include "impactlab/env/gridworld.hpp"
#include "impactlab/nn.hpp"

namespace impactlab::train {

inline constexpr std::size_t kEicmHiddenUnits = 32;

inline agent::AgentSpec agent_spec_for(const env::EnvConfig& cfg) {
  agent::AgentSpec s;
  s.num_agents = cfg.num_agents;
  s.num_actions = env::num_actions(cfg.kind);
  s.view = cfg.view_size;
  s.channels = env::kNumChannels;
  return s;
}

// One independent agent: its networks, its EICM and one optimizer over all of
// them. The optimizer keeps parameter addresses, so a Learner is pinned.
struct Learner {
  agent::AgentNets nets;
  eicm::ForwardModel forward;
  eicm::InverseModel inverse;
  std::unique_ptr<nn::Optimizer> optimizer;
  std::uint64_t seed = 0;

  Learner(const agent::AgentSpec& spec, std::uint64_t init_seed, const nn::OptimizerConfig& opt) : seed(init_seed) {
    CounterRng rng(init_seed, 0x6c6561726e);
    nets = agent::AgentNets(spec, rng);
    const std::size_t q = spec.feature_size(), u = spec.lstm_units;
    forward = eicm::ForwardModel(q, u, spec.num_agents, spec.num_actions, kEicmHiddenUnits, rng);
    inverse = eicm::InverseModel(q, u, spec.num_agents, spec.num_actions, kEicmHiddenUnits, rng);
    optimizer = std::make_unique<nn::Optimizer>(opt, parameters());
  }
  Learner(const Learner&) = delete;
  Learner& operator=(const Learner&) = delete;

  const agent::AgentSpec& spec() const { return nets.spec; }

  nn::ParameterRefs parameters() {
    return nn::concat_refs({nets.parameters(), forward.parameters(), inverse.parameters()});
  }
  nn::ConstParameterRefs const_parameters() {
    auto p = parameters();
    return nn::ConstParameterRefs(p.begin(), p.end());
  }

  std::vector<std::pair<std::string, nn::ParameterRefs>> sections() {
    return {{"encoder", nets.encoder_params()},
            {"actor_critic", nets.actor_critic_params()},
            {"moa", nets.moa_params()},
            {"forward", forward.parameters()},
            {"inverse", inverse.parameters()}};
  }

  void save(const std::string& path) {
    std::vector<nn::CheckpointSection> out;
    for (auto& [name, params] : sections()) out.emplace_back(name, params);
    nn::save_checkpoint(path, out, seed);
  }

  void load(const std::string& path) { seed = nn::load_checkpoint(path, sections()); }
};

using LearnerSet = std::vector<std::unique_ptr<Learner>>;

inline LearnerSet make_learners(const agent::AgentSpec& spec, std::uint64_t seed, const nn::OptimizerConfig& opt) {
  LearnerSet out;
  for (std::size_t k = 0; k < spec.num_agents; ++k) {
    out.push_back(std::make_unique<Learner>(spec, mix64(seed * 0x9e3779b97f4a7c15ULL + k + 1), opt));
  }
  return out;
}

}  // namespace impactlab::train

#endif  // IMPACTLAB_TRAIN_LEARNER_HPP_
