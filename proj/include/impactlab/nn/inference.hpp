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

#ifndef IMPACTLAB_NN_INFERENCE_HPP_
#define IMPACTLAB_NN_INFERENCE_HPP_

// Single-sample forward passes over plain vectors. They compute exactly the
// same arithmetic as the graph ops (same summation order) but bind no
// parameters and record nothing, which keeps per-step acting cheap.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "impactlab/nn/layers.hpp"

namespace impactlab::nn {

inline void dense_infer(const Dense& layer, std::span<const double> x, std::span<double> y, Activation act) {
  const std::size_t n = layer.in(), m = layer.out();
  if (x.size() != n || y.size() != m) {
    throw ShapeError("dense_infer: input " + std::to_string(x.size()) + " / output " + std::to_string(y.size()) +
                     " do not match layer " + std::to_string(n) + "x" + std::to_string(m));
  }
  const double* wp = layer.weight.value.data().data();
  for (std::size_t j = 0; j < m; ++j) y[j] = layer.bias.value[j];
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    if (v == 0.0) continue;
    const double* wr = wp + i * m;
    for (std::size_t j = 0; j < m; ++j) y[j] += v * wr[j];
  }
  if (act == Activation::kRelu) {
    for (double& v : y) v = v > 0.0 ? v : 0.0;
  }
}

inline std::vector<double> dense_infer(const Dense& layer, std::span<const double> x, Activation act) {
  std::vector<double> y(layer.out());
  dense_infer(layer, x, y, act);
  return y;
}

inline void lstm_infer(const Lstm& cell, std::span<const double> x, RecurrentState& state) {
  const std::size_t n = cell.in(), u = cell.units();
  if (x.size() != n) throw ShapeError("lstm_infer: input width " + std::to_string(x.size()) + " != " + std::to_string(n));
  if (state.units() != u) throw ShapeError("lstm_infer: state/cell unit mismatch");
  if (!state.finite()) throw NumericError("lstm: non-finite recurrent state");
  std::vector<double> z(cell.bias.value.data().begin(), cell.bias.value.data().end());
  const double* wx = cell.w_input.value.data().data();
  const double* wh = cell.w_hidden.value.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    if (v == 0.0) continue;
    const double* wr = wx + i * 4 * u;
    for (std::size_t j = 0; j < 4 * u; ++j) z[j] += v * wr[j];
  }
  for (std::size_t i = 0; i < u; ++i) {
    const double v = state.hidden[i];
    if (v == 0.0) continue;
    const double* wr = wh + i * 4 * u;
    for (std::size_t j = 0; j < 4 * u; ++j) z[j] += v * wr[j];
  }
  for (std::size_t j = 0; j < u; ++j) {
    const double ig = detail::sigmoid(z[j]);
    const double fg = detail::sigmoid(z[u + j]);
    const double cg = std::tanh(z[2 * u + j]);
    const double og = detail::sigmoid(z[3 * u + j]);
    state.cell[j] = fg * state.cell[j] + ig * cg;
    state.hidden[j] = og * std::tanh(state.cell[j]);
  }
}

// x is one H x W x C image in HWC order (H == W == side); output is the
// flattened ReLU feature map.
inline std::vector<double> conv_infer(const Conv2d& conv, std::span<const double> x, std::size_t side) {
  const std::size_t c = conv.in_channels(), f = conv.filters(), k = conv.kernel_size();
  if (x.size() != side * side * c) throw ShapeError("conv_infer: input size does not match side and channels");
  if (side < k) throw ShapeError("conv_infer: input smaller than kernel");
  const std::size_t so = side - k + 1;
  std::vector<double> y(so * so * f);
  const double* kp = conv.kernel.value.data().data();
  for (std::size_t i = 0; i < so; ++i) {
    for (std::size_t j = 0; j < so; ++j) {
      double* out = y.data() + (i * so + j) * f;
      for (std::size_t q = 0; q < f; ++q) out[q] = conv.bias.value[q];
      for (std::size_t di = 0; di < k; ++di) {
        for (std::size_t dj = 0; dj < k; ++dj) {
          const double* in = x.data() + ((i + di) * side + j + dj) * c;
          const double* kk = kp + ((di * k + dj) * c) * f;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double v = in[ch];
            if (v == 0.0) continue;
            const double* kr = kk + ch * f;
            for (std::size_t q = 0; q < f; ++q) out[q] += v * kr[q];
          }
        }
      }
    }
  }
  for (double& v : y) v = v > 0.0 ? v : 0.0;
  return y;
}

}  // namespace impactlab::nn

#endif  // IMPACTLAB_NN_INFERENCE_HPP_
