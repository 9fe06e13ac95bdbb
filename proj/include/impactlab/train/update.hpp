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

#ifndef IMPACTLAB_TRAIN_UPDATE_HPP_
#define IMPACTLAB_TRAIN_UPDATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "impactlab/agent.hpp"
#include "impactlab/core/rng.hpp"
#include "impactlab/eicm.hpp"
#include "impactlab/nn.hpp"
#include "impactlab/train/config.hpp"
#include "impactlab/train/learner.hpp"
#include "impactlab/train/rollout.hpp"

namespace impactlab::train {

struct SeqRef {
  std::size_t segment = 0;
  std::size_t sequence = 0;
};

// Padded, time-major training batch for one agent: row t*B + b is step t of
// sequence b. Rows past a sequence's end carry mask 0 and target -1.
struct TrainBatch {
  agent::SequenceInputs seq;
  nn::Tensor next_observations;
  nn::Tensor joint_onehot;     // [T*B, N*|A|], actions taken at t
  std::vector<int> actions;    // [T*B]
  std::vector<int> others;     // [T*B, N-1], fellow agents' actions at t
  std::vector<int> joint;      // [T*B, N]
  nn::Tensor old_logp;         // [T*B, 1]
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> mask;
  std::size_t valid = 0;
};

inline std::vector<SeqRef> all_sequences(const RolloutBuffer& buf) {
  std::vector<SeqRef> refs;
  for (std::size_t s = 0; s < buf.segments.size(); ++s) {
    for (std::size_t q = 0; q < buf.segments[s].sequences.size(); ++q) refs.push_back({s, q});
  }
  return refs;
}

inline TrainBatch make_batch(const RolloutBuffer& buf, std::span<const SeqRef> refs, std::size_t k,
                             const agent::AgentSpec& spec, bool normalize_advantages, bool with_aux) {
  const std::size_t B = refs.size();
  std::size_t T = 0;
  for (const SeqRef& r : refs) T = std::max(T, buf.segments[r.segment].sequences[r.sequence].length);
  const std::size_t n = spec.num_agents, a = spec.num_actions, u = spec.lstm_units;
  const std::size_t obs_size = spec.observation_size(), rows = T * B;
  TrainBatch tb;
  tb.seq.steps = T;
  tb.seq.batch = B;
  tb.seq.observations = nn::Tensor({rows, spec.view, spec.view, spec.channels});
  tb.seq.ac_state = nn::Tensor({B, 2 * u});
  tb.seq.moa_state = nn::Tensor({B, 2 * u});
  tb.seq.prev_joint = nn::Tensor({rows, n * a});
  if (with_aux) {
    tb.next_observations = nn::Tensor({rows, spec.view, spec.view, spec.channels});
    tb.joint_onehot = nn::Tensor({rows, n * a});
  }
  tb.actions.assign(rows, -1);
  tb.others.assign(rows * (n - 1), -1);
  tb.joint.assign(rows * n, -1);
  tb.old_logp = nn::Tensor({rows, 1});
  tb.advantages.assign(rows, 0.0);
  tb.returns.assign(rows, 0.0);
  tb.mask.assign(rows, 0.0);
  auto obs_data = tb.seq.observations.data();
  for (std::size_t b = 0; b < B; ++b) {
    const Segment& seg = buf.segments[refs[b].segment];
    const Sequence& sq = seg.sequences[refs[b].sequence];
    const AgentTrack& tr = seg.agents[k];
    const auto v0 = sq.v0[k].packed(), u0 = sq.u0[k].packed();
    std::copy(v0.data().begin(), v0.data().end(), tb.seq.ac_state.data().begin() + static_cast<long>(b * 2 * u));
    std::copy(u0.data().begin(), u0.data().end(), tb.seq.moa_state.data().begin() + static_cast<long>(b * 2 * u));
    for (std::size_t i = 0; i < sq.length; ++i) {
      const std::size_t t = sq.begin + i, row = i * B + b;
      tr.obs[t].write(obs_data.subspan(row * obs_size, obs_size));
      const auto prev = agent::joint_one_hot(seg.prev_joint_at(t), n, a);
      std::copy(prev.begin(), prev.end(), tb.seq.prev_joint.data().begin() + static_cast<long>(row * n * a));
      const auto jt = seg.joint_at(t);
      if (with_aux) {
        tr.next_obs[t].write(tb.next_observations.data().subspan(row * obs_size, obs_size));
        const auto oh = agent::joint_one_hot(jt, n, a);
        std::copy(oh.begin(), oh.end(), tb.joint_onehot.data().begin() + static_cast<long>(row * n * a));
      }
      std::size_t m = 0;
      for (std::size_t j = 0; j < n; ++j) {
        tb.joint[row * n + j] = jt[j];
        if (j != k) tb.others[row * (n - 1) + m++] = jt[j];
      }
      tb.actions[row] = tr.actions[t];
      tb.old_logp[row] = tr.logp[t];
      tb.advantages[row] = tr.advantages[t];
      tb.returns[row] = tr.returns[t];
      tb.mask[row] = 1.0;
      ++tb.valid;
    }
  }
  if (normalize_advantages && tb.valid > 0) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += tb.mask[r] * tb.advantages[r];
    mean /= static_cast<double>(tb.valid);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) var += tb.mask[r] * (tb.advantages[r] - mean) * (tb.advantages[r] - mean);
    const double sd = std::sqrt(var / static_cast<double>(tb.valid));
    for (std::size_t r = 0; r < rows; ++r) tb.advantages[r] = tb.mask[r] * (tb.advantages[r] - mean) / (sd + 1e-8);
  }
  return tb;
}

// Per-row clipped surrogate min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)
// with rho = exp(logp - old_logp). Shape [B, 1].
inline nn::NodeId ppo_surrogate(nn::Graph& g, nn::NodeId logp_a, nn::NodeId old_logp, nn::NodeId adv,
                                double clip_ratio, nn::NodeId* ratio_out = nullptr) {
  const nn::NodeId ratio = nn::exp(g, nn::sub(g, logp_a, old_logp));
  if (ratio_out) *ratio_out = ratio;
  const nn::NodeId surr1 = nn::mul(g, ratio, adv);
  const nn::NodeId surr2 = nn::mul(g, nn::clamp(g, ratio, 1.0 - clip_ratio, 1.0 + clip_ratio), adv);
  return nn::minimum(g, surr1, surr2);
}

struct LossTerms {
  nn::NodeId policy, value, entropy;
  std::optional<nn::NodeId> moa, forward, inverse;
};

struct LossParts {
  nn::NodeId total;
  LossTerms terms;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double moa = 0.0;
  double forward = 0.0;
  double inverse = 0.0;
  double clip_fraction = 0.0;
};

// policy + c_v * value - c_H * entropy [+ c_moa * MOA + c_F * L_F + c_I * L_I]
// Every term is a mean over the valid rows. The auxiliary terms read the MOA
// hidden vector through a gradient stop, so L_F and L_I reach only the
// encoder and their own model. `pinned_state`, when given, replaces that
// stopped input by a constant [T*B, u] tensor; finite-difference checks of
// the composite loss need it held fixed.
inline LossParts build_loss(nn::Graph& g, const Learner& learner, const TrainBatch& tb, Algo algo, double clip_ratio,
                            const LossCoefficients& c, bool with_aux, const nn::Tensor* pinned_state = nullptr) {
  const auto& spec = learner.nets.spec;
  const std::size_t rows = tb.mask.size(), a = spec.num_actions, n = spec.num_agents;
  const double inv_valid = tb.valid > 0 ? 1.0 / static_cast<double>(tb.valid) : 0.0;
  std::vector<double> w(rows), neg_w(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    w[r] = tb.mask[r] * inv_valid;
    neg_w[r] = -w[r];
  }
  LossParts parts;
  const auto out = agent::build_sequence(g, learner.nets, tb.seq, with_aux);
  const nn::NodeId logp_a = nn::select_blocks(g, out.policy_logp, a, tb.actions);
  const nn::NodeId adv = g.input(nn::Tensor({rows, 1}, tb.advantages));
  nn::NodeId policy;
  if (algo == Algo::kPpo) {
    nn::NodeId ratio;
    policy = nn::weighted_sum(g, ppo_surrogate(g, logp_a, g.input(tb.old_logp), adv, clip_ratio, &ratio), neg_w);
    const auto& rv = g.value(ratio);
    double clipped = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (tb.mask[r] > 0.0 && std::abs(rv[r] - 1.0) > clip_ratio) clipped += 1.0;
    }
    parts.clip_fraction = clipped * inv_valid;
  } else {
    policy = nn::weighted_sum(g, nn::mul(g, logp_a, adv), neg_w);
  }
  const nn::NodeId value =
      nn::weighted_sum(g, nn::square(g, nn::sub(g, out.value, g.input(nn::Tensor({rows, 1}, tb.returns)))), w);
  const nn::NodeId entropy = nn::weighted_sum(g, nn::entropy_blocks(g, out.policy_logp, a), w);
  nn::NodeId total = nn::add(g, policy, nn::scale(g, value, c.value));
  total = nn::sub(g, total, nn::scale(g, entropy, c.entropy));
  parts.terms.policy = policy;
  parts.terms.value = value;
  parts.terms.entropy = entropy;
  parts.policy = g.value(policy)[0];
  parts.value = g.value(value)[0];
  parts.entropy = g.value(entropy)[0];
  if (with_aux) {
    std::vector<double> moa_w(rows);
    for (std::size_t r = 0; r < rows; ++r) moa_w[r] = -w[r] / static_cast<double>(n - 1);
    const nn::NodeId moa = nn::weighted_sum(g, nn::select_blocks(g, out.moa_logp, a, tb.others), moa_w);
    const nn::NodeId phi_next = agent::encode_graph(g, learner.nets.encoder, tb.next_observations);
    const nn::NodeId state = pinned_state ? g.input(*pinned_state) : nn::stop_gradient(g, out.moa_hidden);
    const nn::NodeId fwd = nn::weighted_sum(
        g, eicm::forward_loss_graph(g, learner.forward, out.phi, state, g.input(tb.joint_onehot), phi_next), w);
    const nn::NodeId inv =
        nn::weighted_sum(g, eicm::inverse_loss_graph(g, learner.inverse, out.phi, phi_next, state, tb.joint), w);
    total = nn::add(g, total, nn::scale(g, moa, c.moa));
    total = nn::add(g, total, nn::scale(g, fwd, c.forward));
    total = nn::add(g, total, nn::scale(g, inv, c.inverse));
    parts.terms.moa = moa;
    parts.terms.forward = fwd;
    parts.terms.inverse = inv;
    parts.moa = g.value(moa)[0];
    parts.forward = g.value(fwd)[0];
    parts.inverse = g.value(inv)[0];
  }
  parts.total = total;
  if (!std::isfinite(g.value(total)[0])) {
    throw nn::NumericError("training loss is not finite (policy " + std::to_string(parts.policy) + ", value " +
                           std::to_string(parts.value) + ", entropy " + std::to_string(parts.entropy) + ", moa " +
                           std::to_string(parts.moa) + ", forward " + std::to_string(parts.forward) + ", inverse " +
                           std::to_string(parts.inverse) + ")");
  }
  return parts;
}

struct AgentUpdateStats {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double moa = 0.0;
  double forward = 0.0;
  double inverse = 0.0;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  std::size_t steps = 0;  // optimizer steps

  void add(const LossParts& p, double norm) {
    policy += p.policy;
    value += p.value;
    entropy += p.entropy;
    moa += p.moa;
    forward += p.forward;
    inverse += p.inverse;
    clip_fraction += p.clip_fraction;
    grad_norm += norm;
    ++steps;
  }
  void finish() {
    if (steps == 0) return;
    const double s = 1.0 / static_cast<double>(steps);
    policy *= s;
    value *= s;
    entropy *= s;
    moa *= s;
    forward *= s;
    inverse *= s;
    clip_fraction *= s;
    grad_norm *= s;
  }
};

// Shuffled sequences grouped until each group holds at least minibatch_steps
// steps (the last group takes the remainder).
inline std::vector<std::vector<SeqRef>> make_minibatches(const RolloutBuffer& buf, std::vector<SeqRef> refs,
                                                         std::size_t minibatch_steps, CounterRng& rng) {
  rng.shuffle(refs);
  std::vector<std::vector<SeqRef>> groups(1);
  std::size_t filled = 0;
  for (const SeqRef& r : refs) {
    if (filled >= minibatch_steps) {
      groups.emplace_back();
      filled = 0;
    }
    groups.back().push_back(r);
    filled += buf.segments[r.segment].sequences[r.sequence].length;
  }
  if (groups.back().empty()) groups.pop_back();
  return groups;
}

inline AgentUpdateStats ppo_update_agent(Learner& learner, std::size_t k, const RolloutBuffer& buf,
                                         const TrainerConfig& cfg, bool with_aux, CounterRng rng) {
  AgentUpdateStats stats;
  const auto refs = all_sequences(buf);
  const auto params = learner.const_parameters();
  for (std::size_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    for (const auto& mb : make_minibatches(buf, refs, cfg.minibatch_steps, rng)) {
      const TrainBatch tb = make_batch(buf, mb, k, learner.spec(), true, with_aux);
      nn::Graph g;
      const LossParts parts = build_loss(g, learner, tb, Algo::kPpo, cfg.clip_ratio, coefficients(cfg), with_aux);
      const double norm = learner.optimizer->step(nn::backprop(g, parts.total, params));
      stats.add(parts, norm);
    }
  }
  stats.finish();
  return stats;
}

struct MeanGradient {
  std::vector<nn::Tensor> grads;
  LossParts parts;  // scalar fields averaged over workers
};

// Mean over workers (segments) of each worker's loss gradient.
inline MeanGradient a2c_mean_gradient(const Learner& learner, nn::ConstParameterRefs params, std::size_t k,
                                      const RolloutBuffer& buf, const TrainerConfig& cfg, bool with_aux) {
  MeanGradient out;
  const double inv_w = 1.0 / static_cast<double>(buf.segments.size());
  for (std::size_t s = 0; s < buf.segments.size(); ++s) {
    std::vector<SeqRef> refs;
    for (std::size_t q = 0; q < buf.segments[s].sequences.size(); ++q) refs.push_back({s, q});
    const TrainBatch tb = make_batch(buf, refs, k, learner.spec(), false, with_aux);
    nn::Graph g;
    const LossParts parts = build_loss(g, learner, tb, Algo::kA2cSync, cfg.clip_ratio, coefficients(cfg), with_aux);
    auto grads = nn::backprop(g, parts.total, params);
    if (out.grads.empty()) {
      for (const auto& t : grads) out.grads.emplace_back(t.shape());
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (std::size_t j = 0; j < grads[i].size(); ++j) out.grads[i][j] += inv_w * grads[i][j];
    }
    out.parts.policy += inv_w * parts.policy;
    out.parts.value += inv_w * parts.value;
    out.parts.entropy += inv_w * parts.entropy;
    out.parts.moa += inv_w * parts.moa;
    out.parts.forward += inv_w * parts.forward;
    out.parts.inverse += inv_w * parts.inverse;
  }
  return out;
}

// Synchronous advantage actor-critic: one optimizer step on the mean gradient.
inline AgentUpdateStats a2c_sync_update_agent(Learner& learner, std::size_t k, const RolloutBuffer& buf,
                                              const TrainerConfig& cfg, bool with_aux) {
  AgentUpdateStats stats;
  auto mean = a2c_mean_gradient(learner, learner.const_parameters(), k, buf, cfg, with_aux);
  const double norm = learner.optimizer->step(std::move(mean.grads));
  stats.add(mean.parts, norm);
  stats.finish();
  return stats;
}

// Updates every learner from its own trajectories. Learners are independent,
// so agents may be spread over threads without changing any result.
inline std::vector<AgentUpdateStats> update_learners(LearnerSet& learners, const RolloutBuffer& buf,
                                                     const TrainerConfig& cfg, bool with_aux,
                                                     std::uint64_t update_index) {
  std::vector<AgentUpdateStats> stats(learners.size());
  parallel_for(learners.size(), cfg.workers, [&](std::size_t k) {
    if (cfg.algo == Algo::kPpo) {
      stats[k] = ppo_update_agent(*learners[k], k, buf, cfg, with_aux,
                                  CounterRng(cfg.seed, 0x70706f0000ULL + update_index * 64 + k));
    } else {
      stats[k] = a2c_sync_update_agent(*learners[k], k, buf, cfg, with_aux);
    }
  });
  return stats;
}

}  // namespace impactlab::train

#endif  // IMPACTLAB_TRAIN_UPDATE_HPP_
