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

#ifndef IMPACTLAB_NN_LAYERS_HPP_
#define IMPACTLAB_NN_LAYERS_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "impactlab/core/rng.hpp"
#include "impactlab/nn/graph.hpp"
#include "impactlab/nn/ops.hpp"
#include "impactlab/nn/tensor.hpp"

namespace impactlab::nn {

// Uniform(-s, s) with s = gain * sqrt(1 / fan_in).
inline Tensor uniform_fan_in(Shape shape, std::size_t fan_in, CounterRng& rng, double gain = 1.0) {
  Tensor t(std::move(shape));
  const double s = gain * std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-s, s);
  return t;
}

struct Dense {
  Parameter weight;  // [in, out]
  Parameter bias;    // [out]

  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, CounterRng& rng, double gain = 1.0)
      : weight(name + ".weight", uniform_fan_in({in, out}, in, rng, gain)),
        bias(name + ".bias", uniform_fan_in({out}, in, rng, gain)) {}

  std::size_t in() const { return weight.value.dim(0); }
  std::size_t out() const { return weight.value.dim(1); }

  NodeId operator()(Graph& g, NodeId x, Activation act) const {
    return dense(g, x, g.param(weight), g.param(bias), act);
  }

  ConstParameterRefs parameters() const { return {&weight, &bias}; }
  ParameterRefs parameters() { return {&weight, &bias}; }
};

struct Conv2d {
  Parameter kernel;  // [k, k, in_channels, filters]
  Parameter bias;    // [filters]

  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t kernel_size, std::size_t in_channels, std::size_t filters,
         CounterRng& rng)
      : kernel(name + ".kernel", uniform_fan_in({kernel_size, kernel_size, in_channels, filters},
                                                kernel_size * kernel_size * in_channels, rng)),
        bias(name + ".bias", uniform_fan_in({filters}, kernel_size * kernel_size * in_channels, rng)) {}

  std::size_t kernel_size() const { return kernel.value.dim(0); }
  std::size_t in_channels() const { return kernel.value.dim(2); }
  std::size_t filters() const { return kernel.value.dim(3); }

  // Output spatial extent for a square input of side `side` (valid padding).
  std::size_t output_side(std::size_t side) const { return side - kernel_size() + 1; }

  NodeId operator()(Graph& g, NodeId x) const { return conv2d(g, x, g.param(kernel), g.param(bias)); }

  ConstParameterRefs parameters() const { return {&kernel, &bias}; }
  ParameterRefs parameters() { return {&kernel, &bias}; }
};

struct Lstm {
  Parameter w_input;   // [in, 4u]
  Parameter w_hidden;  // [u, 4u]
  Parameter bias;      // [4u]

  Lstm() = default;
  Lstm(const std::string& name, std::size_t in, std::size_t units, CounterRng& rng)
      : w_input(name + ".w_input", uniform_fan_in({in, 4 * units}, in + units, rng)),
        w_hidden(name + ".w_hidden", uniform_fan_in({units, 4 * units}, in + units, rng)),
        bias(name + ".bias", uniform_fan_in({4 * units}, in + units, rng)) {}

  std::size_t in() const { return w_input.value.dim(0); }
  std::size_t units() const { return w_hidden.value.dim(0); }

  // `state` is [B, 2u] packed (h | c); returns the packed next state.
  NodeId operator()(Graph& g, NodeId x, NodeId state) const {
    return lstm_step(g, x, state, g.param(w_input), g.param(w_hidden), g.param(bias));
  }

  ConstParameterRefs parameters() const { return {&w_input, &w_hidden, &bias}; }
  ParameterRefs parameters() { return {&w_input, &w_hidden, &bias}; }
};

/// Hidden and cell vectors of one LSTM, zero at episode start.
struct RecurrentState {
  std::vector<double> hidden;
  std::vector<double> cell;

  RecurrentState() = default;
  explicit RecurrentState(std::size_t units) : hidden(units, 0.0), cell(units, 0.0) {}

  std::size_t units() const { return hidden.size(); }

  void reset() {
    std::fill(hidden.begin(), hidden.end(), 0.0);
    std::fill(cell.begin(), cell.end(), 0.0);
  }

  bool finite() const {
    for (double v : hidden) if (!std::isfinite(v)) return false;
    for (double v : cell) if (!std::isfinite(v)) return false;
    return true;
  }

  // Packed [1, 2u] tensor, the layout lstm_step consumes.
  Tensor packed() const {
    std::vector<double> d(hidden);
    d.insert(d.end(), cell.begin(), cell.end());
    return Tensor({1, 2 * units()}, std::move(d));
  }

  static RecurrentState unpack(std::span<const double> packed_row) {
    RecurrentState s;
    const std::size_t u = packed_row.size() / 2;
    s.hidden.assign(packed_row.begin(), packed_row.begin() + static_cast<std::ptrdiff_t>(u));
    s.cell.assign(packed_row.begin() + static_cast<std::ptrdiff_t>(u), packed_row.end());
    return s;
  }

  friend bool operator==(const RecurrentState&, const RecurrentState&) = default;
};

// Stateless single-sample LSTM step on plain vectors; returns the output (== new hidden).
inline std::vector<double> lstm_forward(const Lstm& cell, std::span<const double> input, RecurrentState& state) {
  if (state.units() != cell.units()) {
    throw ShapeError("lstm_forward: state has " + std::to_string(state.units()) + " units, cell has " +
                     std::to_string(cell.units()));
  }
  if (!state.finite()) throw NumericError("lstm_forward: non-finite recurrent state");
  Graph g;
  NodeId x = g.input(Tensor({1, input.size()}, std::vector<double>(input.begin(), input.end())));
  NodeId s = g.input(state.packed());
  NodeId out = cell(g, x, s);
  state = RecurrentState::unpack(g.value(out).data());
  return state.hidden;
}

inline ConstParameterRefs concat_refs(std::initializer_list<ConstParameterRefs> groups) {
  ConstParameterRefs out;
  for (const auto& grp : groups) out.insert(out.end(), grp.begin(), grp.end());
  return out;
}

inline ParameterRefs concat_refs(std::initializer_list<ParameterRefs> groups) {
  ParameterRefs out;
  for (const auto& grp : groups) out.insert(out.end(), grp.begin(), grp.end());
  return out;
}

}  // namespace impactlab::nn

#endif  // IMPACTLAB_NN_LAYERS_HPP_
