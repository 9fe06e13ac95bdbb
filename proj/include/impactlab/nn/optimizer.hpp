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

#ifndef IMPACTLAB_NN_OPTIMIZER_HPP_
#define IMPACTLAB_NN_OPTIMIZER_HPP_

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/nn/tensor.hpp"

namespace impactlab::nn {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> grad_clip_norm;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("optimizer: betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be > 0");
    if (grad_clip_norm && !(*grad_clip_norm > 0.0)) {
      throw std::invalid_argument("optimizer: grad_clip_norm must be > 0 when set");
    }
  }
};

inline double global_norm(const std::vector<Tensor>& grads) {
  double s = 0.0;
  for (const Tensor& g : grads) s += g.squared_norm();
  return std::sqrt(s);
}

/// SGD / Adam over a fixed list of parameters. Moments are kept per
/// parameter, in list order.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, ParameterRefs params) : config_(config), params_(std::move(params)) {
    config_.validate();
    if (config_.kind == OptimizerKind::kAdam) {
      for (const Parameter* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
      }
    }
  }

  // Applies one update; returns the pre-clipping global gradient norm.
  double step(std::vector<Tensor> grads) {
    if (grads.size() != params_.size()) throw ShapeError("optimizer: gradient list arity mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (grads[i].shape() != params_[i]->value.shape()) {
        throw ShapeError("optimizer: gradient for " + params_[i]->name + " has shape " +
                         shape_string(grads[i].shape()) + ", parameter is " +
                         shape_string(params_[i]->value.shape()));
      }
      if (!grads[i].all_finite()) throw NumericError("optimizer: non-finite gradient for " + params_[i]->name);
    }
    const double norm = global_norm(grads);
    if (config_.grad_clip_norm && norm > *config_.grad_clip_norm) {
      const double s = *config_.grad_clip_norm / norm;
      for (Tensor& g : grads) {
        for (double& x : g.data()) x *= s;
      }
    }
    ++steps_;
    if (config_.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& w = params_[i]->value;
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= config_.learning_rate * grads[i][j];
      }
    } else {
      const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
      const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
      for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& w = params_[i]->value;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
          m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
          v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
          const double mhat = m[j] / bc1;
          const double vhat = v[j] / bc2;
          w[j] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
        }
      }
    }
    return norm;
  }

  std::size_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  ParameterRefs params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t steps_ = 0;
};

}  // namespace impactlab::nn

#endif  // IMPACTLAB_NN_OPTIMIZER_HPP_
