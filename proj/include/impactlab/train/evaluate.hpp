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

#ifndef IMPACTLAB_TRAIN_EVALUATE_HPP_
#define IMPACTLAB_TRAIN_EVALUATE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "impactlab/agent.hpp"
#include "impactlab/core/rng.hpp"
#include "impactlab/env/gridworld.hpp"
#include "impactlab/train/learner.hpp"
#include "impactlab/train/rollout.hpp"

namespace impactlab::train {

struct EvalResult {
  double collective = 0.0;  // mean over episodes
  double equality = 0.0;
  std::vector<EpisodeStats> episodes;
};

// Called after every environment step with the episode index.
using FrameSink = std::function<void(const env::EnvState&, std::size_t episode)>;

// Chooses the joint action for the current state.
using JointPolicy = std::function<std::vector<int>(const env::Gridworld&, const env::EnvState&)>;

inline std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t episode) {
  return mix64(seed ^ mix64(0x6576616cULL + episode));
}

inline EvalResult run_episodes(const env::Gridworld& env, std::size_t episodes, std::uint64_t seed,
                               const std::function<JointPolicy(std::size_t episode)>& policy_for_episode,
                               const FrameSink& sink = {}) {
  if (episodes == 0) throw std::invalid_argument("evaluate: episodes must be positive");
  EvalResult res;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    env::EnvState state = env.reset(eval_episode_seed(seed, ep));
    JointPolicy policy = policy_for_episode(ep);
    EpisodeStats stats;
    stats.returns.assign(env.num_agents(), 0.0);
    for (;;) {
      const auto joint = policy(env, state);
      const auto out = env.step(state, joint);
      stats.record(out);
      if (sink) sink(state, ep);
      if (out.done) break;
    }
    res.collective += stats.collective();
    res.equality += stats.equality();
    res.episodes.push_back(std::move(stats));
  }
  res.collective /= static_cast<double>(episodes);
  res.equality /= static_cast<double>(episodes);
  return res;
}

// Rolls out the learners' policies without learning. Sampled by default.
inline EvalResult evaluate(const LearnerSet& learners, const env::EnvConfig& cfg, std::size_t episodes,
                           std::uint64_t seed, bool greedy = false, const FrameSink& sink = {}) {
  const env::Gridworld env(cfg);
  if (learners.size() != env.num_agents()) throw std::invalid_argument("evaluate: learner count does not match env");
  const std::size_t units = learners.front()->spec().lstm_units;
  return run_episodes(
      env, episodes, seed,
      [&](std::size_t ep) -> JointPolicy {
        auto memory = std::make_shared<std::vector<agent::AgentMemory>>(env.num_agents(), agent::AgentMemory(units));
        auto rng = std::make_shared<CounterRng>(seed, 0x65706f6c00ULL + ep);
        return [&, memory, rng, greedy](const env::Gridworld& e, const env::EnvState& s) {
          std::vector<int> joint(e.num_agents());
          for (std::size_t k = 0; k < joint.size(); ++k) {
            joint[k] = agent::act(learners[k]->nets, e.observe(s, k), (*memory)[k], *rng, greedy).action;
          }
          return joint;
        };
      },
      sink);
}

// Uniformly random joint actions.
inline EvalResult evaluate_random(const env::EnvConfig& cfg, std::size_t episodes, std::uint64_t seed) {
  const env::Gridworld env(cfg);
  return run_episodes(env, episodes, seed, [&](std::size_t ep) -> JointPolicy {
    auto rng = std::make_shared<CounterRng>(seed, 0x72616e6400ULL + ep);
    return [rng](const env::Gridworld& e, const env::EnvState&) {
      std::vector<int> joint(e.num_agents());
      for (int& a : joint) a = static_cast<int>(rng->uniform_int(e.num_actions()));
      return joint;
    };
  });
}

}  // namespace impactlab::train

#endif  // IMPACTLAB_TRAIN_EVALUATE_HPP_
