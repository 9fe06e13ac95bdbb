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

#ifndef IMPACTLAB_TRAIN_TRAINER_HPP_
#define IMPACTLAB_TRAIN_TRAINER_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "impactlab/env/gridworld.hpp"
#include "impactlab/shaping.hpp"
#include "impactlab/train/config.hpp"
#include "impactlab/train/learner.hpp"
#include "impactlab/train/rollout.hpp"
#include "impactlab/train/update.hpp"

namespace impactlab::train {

struct UpdateMetrics {
  std::size_t update = 0;     // 1-based
  std::size_t env_steps = 0;  // cumulative, summed over workers
  std::size_t episodes = 0;   // completed during this update's collection
  // Over the completed episodes; unset when none finished.
  std::optional<double> collective;
  std::optional<double> equality;
  double apples = 0.0;  // per completed episode
  double clean_beams = 0.0;
  double punish_beams = 0.0;
  // Per agent-step means.
  double extrinsic = 0.0;
  double intrinsic = 0.0;
  double reshaped = 0.0;
  // Emurel only: statistics of normalized and raw impact entries.
  double impact_mean = 0.0;
  double impact_min = 0.0;
  double impact_max = 0.0;
  double impact_raw_mean = 0.0;
  AgentUpdateStats losses;  // mean over agents
};

class Trainer {
 public:
  Trainer(env::EnvConfig env_cfg, shaping::ShapingConfig shaping, TrainerConfig cfg)
      : env_cfg_(std::move(env_cfg)), shaping_(shaping), cfg_(cfg), env_(env_cfg_), spec_(agent_spec_for(env_cfg_)) {
    shaping_.validate();
    cfg_.validate();
    learners_ = make_learners(spec_, cfg_.seed, cfg_.optimizer);
    for (std::size_t w = 0; w < cfg_.workers; ++w) {
      workers_.emplace_back(env_, w, mix64(cfg_.seed ^ 0x776f726b6572ULL), shaping_, spec_.lstm_units);
    }
  }
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const env::EnvConfig& env_config() const { return env_cfg_; }
  const shaping::ShapingConfig& shaping_config() const { return shaping_; }
  const TrainerConfig& config() const { return cfg_; }
  const agent::AgentSpec& spec() const { return spec_; }
  LearnerSet& learners() { return learners_; }
  const LearnerSet& learners() const { return learners_; }
  std::size_t updates_done() const { return updates_; }
  std::size_t env_steps() const { return env_steps_; }
  bool trains_auxiliary() const { return shaping_.mode == shaping::ShapingMode::kEmurel; }
  const RolloutBuffer& last_buffer() const { return buffer_; }

  // One collection followed by one update of every learner.
  UpdateMetrics step() {
    buffer_ = collect_rollouts(workers_, learners_, cfg_.batch_steps / cfg_.workers, cfg_.sequence_length,
                               cfg_.workers);
    compute_advantages(buffer_, shaping_.gamma, cfg_.effective_gae_lambda());
    const auto stats = update_learners(learners_, buffer_, cfg_, trains_auxiliary(), updates_);
    ++updates_;
    env_steps_ += buffer_.steps();
    return summarize(stats);
  }

 private:
  UpdateMetrics summarize(const std::vector<AgentUpdateStats>& stats) const {
    UpdateMetrics m;
    m.update = updates_;
    m.env_steps = env_steps_;
    double coll = 0.0, eq = 0.0;
    std::size_t agent_steps = 0, impact_entries = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Segment& seg : buffer_.segments) {
      for (const EpisodeStats& ep : seg.episodes) {
        coll += ep.collective();
        eq += ep.equality();
        m.apples += static_cast<double>(ep.apples);
        m.clean_beams += static_cast<double>(ep.clean_beams);
        m.punish_beams += static_cast<double>(ep.punish_beams);
        ++m.episodes;
      }
      for (const AgentTrack& tr : seg.agents) {
        for (std::size_t t = 0; t < tr.extrinsic.size(); ++t) {
          m.extrinsic += tr.extrinsic[t];
          m.intrinsic += tr.intrinsic[t];
          m.reshaped += tr.reshaped[t];
          ++agent_steps;
        }
        for (std::size_t t = 0; t < tr.impacts.size(); ++t) {
          for (std::size_t j = 0; j < tr.impacts[t].size(); ++j) {
            m.impact_mean += tr.impacts[t][j];
            m.impact_raw_mean += tr.raw_impacts[t][j];
            lo = std::min(lo, tr.impacts[t][j]);
            hi = std::max(hi, tr.impacts[t][j]);
            ++impact_entries;
          }
        }
      }
    }
    if (m.episodes > 0) {
      const double s = 1.0 / static_cast<double>(m.episodes);
      m.collective = coll * s;
      m.equality = eq * s;
      m.apples *= s;
      m.clean_beams *= s;
      m.punish_beams *= s;
    }
    if (agent_steps > 0) {
      const double s = 1.0 / static_cast<double>(agent_steps);
      m.extrinsic *= s;
      m.intrinsic *= s;
      m.reshaped *= s;
    }
    if (impact_entries > 0) {
      m.impact_mean /= static_cast<double>(impact_entries);
      m.impact_raw_mean /= static_cast<double>(impact_entries);
      m.impact_min = lo;
      m.impact_max = hi;
    }
    for (const auto& s : stats) {
      m.losses.policy += s.policy;
      m.losses.value += s.value;
      m.losses.entropy += s.entropy;
      m.losses.moa += s.moa;
      m.losses.forward += s.forward;
      m.losses.inverse += s.inverse;
      m.losses.grad_norm += s.grad_norm;
      m.losses.clip_fraction += s.clip_fraction;
      m.losses.steps += s.steps;
    }
    const double inv_n = 1.0 / static_cast<double>(stats.size());
    m.losses.policy *= inv_n;
    m.losses.value *= inv_n;
    m.losses.entropy *= inv_n;
    m.losses.moa *= inv_n;
    m.losses.forward *= inv_n;
    m.losses.inverse *= inv_n;
    m.losses.grad_norm *= inv_n;
    m.losses.clip_fraction *= inv_n;
    return m;
  }

  env::EnvConfig env_cfg_;
  shaping::ShapingConfig shaping_;
  TrainerConfig cfg_;
  env::Gridworld env_;
  agent::AgentSpec spec_;
  LearnerSet learners_;
  std::vector<RolloutWorker> workers_;
  RolloutBuffer buffer_;
  std::size_t updates_ = 0;
  std::size_t env_steps_ = 0;
};

}  // namespace impactlab::train

#endif  // IMPACTLAB_TRAIN_TRAINER_HPP_
