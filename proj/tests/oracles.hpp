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

#ifndef IMPACTLAB_TESTS_ORACLES_HPP_
#define IMPACTLAB_TESTS_ORACLES_HPP_

// Reference implementations written independently of the library: they
// favour the most literal form of each formula over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace impactlab::oracle {

// Closed form of the smoothing recursion: w_t = sum_{i<=t} (g*l)^(t-i) e_i.
inline double smoothed_closed_form(const std::vector<double>& e, double gamma, double lambda) {
  double w = 0.0;
  const std::size_t t = e.size();
  for (std::size_t i = 0; i < t; ++i) w += std::pow(gamma * lambda, static_cast<double>(t - 1 - i)) * e[i];
  return w;
}

// Impact-scaled inequity term over the explicit list of "others"; with all
// scales at 1 it is the plain inequity-aversion reward.
inline double scaled_inequity(const std::vector<double>& w, const std::vector<double>& scale, std::size_t k,
                              double alpha, double beta) {
  std::vector<double> others;
  for (std::size_t j = 0, m = 0; j < w.size(); ++j) {
    if (j != k) others.push_back(scale[m++] * w[j]);
  }
  const double n1 = static_cast<double>(w.size()) - 1.0;
  double a = 0.0;
  double b = 0.0;
  for (double x : others) {
    a += x > w[k] ? x - w[k] : 0.0;
    b += w[k] > x ? w[k] - x : 0.0;
  }
  return -(alpha * a) / n1 - (beta * b) / n1;
}

// Equality via the sorted-rank Gini formula G = sum_i (2i - n - 1) x_(i) / (n sum x).
inline double equality_sorted(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  if (total == 0.0) return 1.0;
  double g = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) g += (2.0 * static_cast<double>(i + 1) - n - 1.0) * x[i];
  return 1.0 - g / (n * total);
}

// Min-max normalization of one impact row; a constant row maps to all ones.
inline std::vector<double> minmax(const std::vector<double>& raw) {
  const double lo = *std::min_element(raw.begin(), raw.end());
  const double hi = *std::max_element(raw.begin(), raw.end());
  std::vector<double> out(raw.size(), 1.0);
  if (hi > lo) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / (hi - lo);
  }
  return out;
}

// Backward recursion for discounted returns and GAE.
inline std::vector<double> discounted_returns(const std::vector<double>& r, double gamma, double bootstrap = 0.0) {
  std::vector<double> g(r.size());
  double acc = bootstrap;
  for (std::size_t i = r.size(); i-- > 0;) {
    acc = r[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

}  // namespace impactlab::oracle

#endif  // IMPACTLAB_TESTS_ORACLES_HPP_
