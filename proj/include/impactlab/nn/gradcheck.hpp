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

#ifndef IMPACTLAB_NN_GRADCHECK_HPP_
#define IMPACTLAB_NN_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "impactlab/nn/graph.hpp"
#include "impactlab/nn/tensor.hpp"

namespace impactlab::nn {

// Builds a fresh forward pass on the given graph and returns the scalar loss node.
using LossBuilder = std::function<NodeId(Graph&)>;

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  double relu_margin = 0.0;  // of the unperturbed pass
};

/// Compares reverse-mode gradients with the fourth-order central difference
/// (−L(θ+2ε) + 8L(θ+ε) − 8L(θ−ε) + L(θ−2ε)) / 12ε for every entry of every
/// listed parameter. The higher order lets ε stay near 1e-3, where the
/// cancellation error of a loss of size |L| (about |L|·1e-16/ε) is small.
/// Relative error per entry is |a − b| / max(|a|, |b|, 1e-8).
/// `stride` > 1 checks every stride-th entry (deterministic subsampling for
/// large tensors).
inline GradientCheckReport finite_difference_report(const ParameterRefs& params, const LossBuilder& build,
                                                    double epsilon, std::size_t stride = 1) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw std::invalid_argument("finite_difference_check: epsilon must lie in [1e-6, 1e-3]");
  }
  if (stride == 0) throw std::invalid_argument("finite_difference_check: stride must be positive");
  ConstParameterRefs cparams(params.begin(), params.end());
  std::vector<Tensor> analytic;
  GradientCheckReport report;
  {
    Graph g;
    NodeId loss = build(g);
    report.relu_margin = g.relu_margin();
    analytic = backprop(g, loss, cparams);
  }
  auto eval = [&]() {
    Graph g;
    NodeId loss = build(g);
    return g.value(loss)[0];
  };
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = params[p]->value;
    for (std::size_t i = 0; i < value.size(); i += stride) {
      const double saved = value[i];
      auto at = [&](double offset) {
        value[i] = saved + offset;
        return eval();
      };
      // Differences first so symmetric values cancel exactly.
      const double near = at(epsilon) - at(-epsilon);
      const double far = at(2.0 * epsilon) - at(-2.0 * epsilon);
      const double numeric = (8.0 * near - far) / (12.0 * epsilon);
      value[i] = saved;
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
      ++report.entries_checked;
    }
  }
  return report;
}

inline double finite_difference_check(const ParameterRefs& params, const LossBuilder& build, double epsilon,
                                      std::size_t stride = 1) {
  return finite_difference_report(params, build, epsilon, stride).max_relative_error;
}

}  // namespace impactlab::nn

#endif  // IMPACTLAB_NN_GRADCHECK_HPP_
