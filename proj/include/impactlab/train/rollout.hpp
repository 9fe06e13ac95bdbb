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

#ifndef IMPACTLAB_TRAIN_ROLLOUT_HPP_
#define IMPACTLAB_TRAIN_ROLLOUT_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "impactlab/agent.hpp"
#include "impactlab/core/rng.hpp"
#include "impactlab/eicm.hpp"
#include "impactlab/env/gridworld.hpp"
#include "impactlab/shaping.hpp"
#include "impactlab/train/learner.hpp"

namespace impactlab::train {

struct EpisodeStats {
  std::vector<double> returns;  // extrinsic, per agent
  std::size_t apples = 0;
  std::size_t punish_beams = 0;
  std::size_t clean_beams = 0;
  std::size_t hits = 0;
  std::size_t waste_cleaned = 0;

  double collective() const {
    double s = 0.0;
    for (double r : returns) s += r;
    return s;
  }

  // Gini equality over returns clamped at zero (fire costs and hits can push
  // an individual return negative).
  double equality() const {
    std::vector<double> r(returns);
    for (double& x : r) x = std::max(x, 0.0);
    return shaping::gini_equality(r);
  }

  void record(const env::StepOutcome& out) {
    for (std::size_t k = 0; k < returns.size(); ++k) returns[k] += out.extrinsic[k];
    for (const env::Event& e : out.events) {
      switch (e.kind) {
        case env::EventKind::kAppleCollected: ++apples; break;
        case env::EventKind::kAgentHit: ++hits; break;
        case env::EventKind::kWasteCleaned: ++waste_cleaned; break;
        case env::EventKind::kBeamFired:
          if (e.other == static_cast<int>(env::Action::kFireClean)) ++clean_beams;
          else ++punish_beams;
          break;
      }
    }
  }
};

// Trajectory of one agent within a segment. Index t is the segment step.
struct AgentTrack {
  std::vector<env::Observation> obs;
  std::vector<env::Observation> next_obs;
  std::vector<int> actions;
  std::vector<double> logp;  // of the taken action, at collection time
  std::vector<double> values;
  std::vector<double> extrinsic;
  std::vector<double> intrinsic;
  std::vector<double> reshaped;
  std::vector<std::vector<double>> impacts;      // normalized rows, emurel only
  std::vector<std::vector<double>> raw_impacts;  // emurel only
  double bootstrap_value = 0.0;                  // V(next state) when the segment ends mid-episode
  std::vector<double> advantages;
  std::vector<double> returns;
};

// A run of consecutive steps of one episode, the unit of truncated BPTT.
struct Sequence {
  std::size_t begin = 0;
  std::size_t length = 0;
  std::vector<nn::RecurrentState> v0;  // per agent, before the first step
  std::vector<nn::RecurrentState> u0;
};

// Everything one worker collected between two updates.
struct Segment {
  std::size_t steps = 0;
  std::size_t num_agents = 0;
  std::vector<int> joint;       // [T, N] actions taken
  std::vector<int> prev_joint;  // [T, N] previous joint action, -1 at episode start
  std::vector<std::uint8_t> done;
  std::vector<AgentTrack> agents;
  std::vector<Sequence> sequences;
  std::vector<EpisodeStats> episodes;  // completed in this segment

  std::span<const int> joint_at(std::size_t t) const { return {joint.data() + t * num_agents, num_agents}; }
  std::span<const int> prev_joint_at(std::size_t t) const {
    return {prev_joint.data() + t * num_agents, num_agents};
  }
};

struct RolloutBuffer {
  std::vector<Segment> segments;

  std::size_t steps() const {
    std::size_t s = 0;
    for (const auto& seg : segments) s += seg.steps;
    return s;
  }
};

// Persistent environment copy plus per-agent memories and smoothed rewards.
// Episodes continue across collections.
class RolloutWorker {
 public:
  RolloutWorker(const env::Gridworld& env, std::size_t index, std::uint64_t seed, shaping::ShapingConfig shaping,
                std::size_t lstm_units)
      : env_(&env), index_(index), seed_(seed), shaping_(shaping),
        memory_(env.num_agents(), agent::AgentMemory(lstm_units)), smoothed_(env.num_agents()),
        prev_joint_(env.num_agents(), -1), sampler_(seed, 0x73616d70ULL + index) {}

  std::uint64_t episodes_started() const { return episodes_; }

  // Reset seed of this worker's episode number `episode` (0-based).
  std::uint64_t episode_seed(std::uint64_t episode) const {
    return mix64(seed_ ^ mix64((static_cast<std::uint64_t>(index_) << 40) + episode + 1));
  }

  Segment collect(const LearnerSet& learners, std::size_t steps, std::size_t sequence_length) {
    const std::size_t n = env_->num_agents();
    if (learners.size() != n) {
      throw std::invalid_argument("collect: " + std::to_string(learners.size()) + " learners for " +
                                  std::to_string(n) + " agents");
    }
    const bool emurel = shaping_.mode == shaping::ShapingMode::kEmurel;
    Segment seg;
    seg.steps = steps;
    seg.num_agents = n;
    seg.agents.resize(n);
    std::size_t in_sequence = 0;
    std::vector<std::vector<double>> phi(n);
    std::vector<int> joint(n);
    std::vector<std::vector<double>> impacts(emurel ? n : 0);
    for (std::size_t t = 0; t < steps; ++t) {
      bool fresh = false;
      if (!active_) {
        begin_episode();
        fresh = true;
      }
      if (t == 0 || fresh || in_sequence == sequence_length) {
        Sequence s;
        s.begin = t;
        for (const auto& m : memory_) {
          s.v0.push_back(m.v);
          s.u0.push_back(m.u);
        }
        seg.sequences.push_back(std::move(s));
        in_sequence = 0;
      }
      ++in_sequence;
      ++seg.sequences.back().length;

      for (std::size_t k = 0; k < n; ++k) {
        AgentTrack& tr = seg.agents[k];
        tr.obs.push_back(env_->observe(state_, k));
        phi[k] = agent::encode_features(learners[k]->nets.encoder, tr.obs.back());
        const auto pol = agent::act_features(learners[k]->nets, phi[k], memory_[k], sampler_);
        joint[k] = pol.action;
        tr.actions.push_back(pol.action);
        tr.logp.push_back(pol.log_probs[static_cast<std::size_t>(pol.action)]);
        tr.values.push_back(pol.value);
      }
      if (emurel) {
        for (std::size_t k = 0; k < n; ++k) agent::moa_predict_features(learners[k]->nets, phi[k], prev_joint_, memory_[k]);
      }
      const env::StepOutcome out = env_->step(state_, joint);
      if (emurel) {
        for (std::size_t k = 0; k < n; ++k) {
          auto row = eicm::impact_row(learners[k]->forward, phi[k], memory_[k].u.hidden, joint, k);
          seg.agents[k].raw_impacts.push_back(row.raw);
          seg.agents[k].impacts.push_back(row.normalized);
          impacts[k] = std::move(row.normalized);
        }
      }
      const auto shaped = shaping::shape_step(shaping_, smoothed_, out.extrinsic, impacts);
      for (std::size_t k = 0; k < n; ++k) {
        AgentTrack& tr = seg.agents[k];
        tr.next_obs.push_back(env_->observe(state_, k));
        tr.extrinsic.push_back(shaped.extrinsic[k]);
        tr.intrinsic.push_back(shaped.intrinsic[k]);
        tr.reshaped.push_back(shaped.reshaped[k]);
      }
      seg.joint.insert(seg.joint.end(), joint.begin(), joint.end());
      seg.prev_joint.insert(seg.prev_joint.end(), prev_joint_.begin(), prev_joint_.end());
      seg.done.push_back(out.done ? 1 : 0);
      running_.record(out);
      prev_joint_ = joint;
      if (out.done) {
        seg.episodes.push_back(std::move(running_));
        active_ = false;
      }
    }
    if (!seg.done.empty() && !seg.done.back()) {
      // Bootstrap from the next state without disturbing the live memory.
      for (std::size_t k = 0; k < n; ++k) {
        agent::AgentMemory copy = memory_[k];
        CounterRng unused;
        const auto pol = agent::act(learners[k]->nets, seg.agents[k].next_obs.back(), copy, unused, true);
        seg.agents[k].bootstrap_value = pol.value;
      }
    }
    return seg;
  }

 private:
  void begin_episode() {
    state_ = env_->reset(episode_seed(episodes_));
    for (auto& m : memory_) m.begin_episode(episodes_);
    smoothed_.reset();
    std::fill(prev_joint_.begin(), prev_joint_.end(), -1);
    running_ = EpisodeStats{};
    running_.returns.assign(env_->num_agents(), 0.0);
    ++episodes_;
    active_ = true;
  }

  const env::Gridworld* env_;
  std::size_t index_;
  std::uint64_t seed_;
  shaping::ShapingConfig shaping_;
  env::EnvState state_;
  bool active_ = false;
  std::vector<agent::AgentMemory> memory_;
  shaping::ShapingState smoothed_;
  std::vector<int> prev_joint_;
  CounterRng sampler_;
  std::uint64_t episodes_ = 0;
  EpisodeStats running_;
};

// Runs fn(i) for i in [0, n) on up to `threads` threads; rethrows the first
// failure (lowest index).
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  const std::size_t t_count = std::min(threads, n);
  for (std::size_t w = 0; w < t_count; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t_count) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Fork-join collection: worker w fills segment w from a frozen parameter snapshot.
inline RolloutBuffer collect_rollouts(std::vector<RolloutWorker>& workers, const LearnerSet& learners,
                                      std::size_t steps_per_worker, std::size_t sequence_length,
                                      std::size_t threads) {
  RolloutBuffer buf;
  buf.segments.resize(workers.size());
  parallel_for(workers.size(), threads, [&](std::size_t w) {
    buf.segments[w] = workers[w].collect(learners, steps_per_worker, sequence_length);
  });
  return buf;
}

// Generalized advantage estimation over one agent's segment. A done step has
// no successor; the last step of a truncated segment bootstraps.
inline void compute_gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const std::uint8_t> done, double bootstrap, double gamma, double lambda,
                        std::vector<double>& advantages, std::vector<double>& returns) {
  const std::size_t T = rewards.size();
  if (values.size() != T || done.size() != T) throw std::invalid_argument("compute_gae: length mismatch");
  advantages.assign(T, 0.0);
  returns.assign(T, 0.0);
  double gae = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double next_value = done[t] ? 0.0 : (t + 1 < T ? values[t + 1] : bootstrap);
    const double delta = rewards[t] + gamma * next_value - values[t];
    gae = delta + (done[t] ? 0.0 : gamma * lambda * gae);
    advantages[t] = gae;
    returns[t] = gae + values[t];
  }
}

inline void compute_advantages(RolloutBuffer& buf, double gamma, double lambda) {
  for (Segment& seg : buf.segments) {
    for (AgentTrack& tr : seg.agents) {
      compute_gae(tr.reshaped, tr.values, seg.done, tr.bootstrap_value, gamma, lambda, tr.advantages, tr.returns);
    }
  }
}

}  // namespace impactlab::train

#endif  // IMPACTLAB_TRAIN_ROLLOUT_HPP_
