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

#ifndef IMPACTLAB_TRAIN_CONFIG_HPP_
#define IMPACTLAB_TRAIN_CONFIG_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "impactlab/nn/optimizer.hpp"

namespace impactlab::train {

enum class Algo { kPpo, kA2cSync };

inline std::string_view to_string(Algo a) { return a == Algo::kPpo ? "ppo" : "a2c_sync"; }

inline Algo parse_algo(std::string_view s) {
  if (s == "ppo") return Algo::kPpo;
  if (s == "a2c_sync") return Algo::kA2cSync;
  throw std::invalid_argument("unknown algo '" + std::string(s) + "' (expected ppo or a2c_sync)");
}

struct TrainerConfig {
  Algo algo = Algo::kPpo;
  std::size_t updates = 200;
  std::size_t batch_steps = 2000;    // env steps collected per update, summed over workers
  std::size_t minibatch_steps = 500;
  std::size_t ppo_epochs = 4;
  std::size_t sequence_length = 20;  // truncated BPTT window
  double clip_ratio = 0.2;
  std::optional<double> gae_lambda;  // 0.95 for ppo, 1.0 for a2c_sync when unset
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double moa_coef = 1.0;
  double forward_coef = 10.0;
  double inverse_coef = 5.0;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam, 5e-4, 0.9, 0.999, 1e-8, 40.0};

  double effective_gae_lambda() const { return gae_lambda.value_or(algo == Algo::kPpo ? 0.95 : 1.0); }

  void validate() const {
    if (updates == 0) throw std::invalid_argument("trainer: updates must be positive");
    if (batch_steps == 0) throw std::invalid_argument("trainer: batch_steps must be positive");
    if (minibatch_steps == 0 || minibatch_steps > batch_steps) {
      throw std::invalid_argument("trainer: minibatch_steps must lie in [1, batch_steps]");
    }
    if (workers == 0) throw std::invalid_argument("trainer: workers must be positive");
    if (batch_steps % workers != 0) throw std::invalid_argument("trainer: batch_steps must be divisible by workers");
    if (ppo_epochs == 0) throw std::invalid_argument("trainer: ppo_epochs must be positive");
    if (sequence_length == 0) throw std::invalid_argument("trainer: sequence_length must be positive");
    if (!(clip_ratio > 0.0)) throw std::invalid_argument("trainer: clip_ratio must be > 0");
    const double lam = effective_gae_lambda();
    if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("trainer: gae_lambda must lie in [0, 1]");
    for (double c : {value_coef, entropy_coef, moa_coef, forward_coef, inverse_coef}) {
      if (!std::isfinite(c) || c < 0.0) throw std::invalid_argument("trainer: loss coefficients must be finite and >= 0");
    }
    optimizer.validate();
  }
};

struct LossCoefficients {
  double value = 0.5;
  double entropy = 0.01;
  double moa = 1.0;
  double forward = 10.0;
  double inverse = 5.0;
};

inline LossCoefficients coefficients(const TrainerConfig& c) {
  return {c.value_coef, c.entropy_coef, c.moa_coef, c.forward_coef, c.inverse_coef};
}

}  // namespace impactlab::train

#endif  // IMPACTLAB_TRAIN_CONFIG_HPP_
