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

#ifndef IMPACTLAB_TESTS_TEST_UTIL_HPP_
#define IMPACTLAB_TESTS_TEST_UTIL_HPP_

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "impactlab/core/rng.hpp"
#include "impactlab/env/gridworld.hpp"
#include "impactlab/nn/tensor.hpp"

namespace impactlab::test {

inline std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "impactlab_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

inline std::vector<std::uint64_t> bits(const nn::Tensor& t) {
  std::vector<std::uint64_t> out;
  for (double v : t.data()) out.push_back(std::bit_cast<std::uint64_t>(v));
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// One base channel per cell plus occasional agent / beam bits.
inline env::Observation random_observation(CounterRng& rng, std::size_t view = 15) {
  env::Observation o;
  o.view = view;
  o.cells.resize(view * view);
  for (auto& c : o.cells) {
    c = static_cast<std::uint8_t>(1u << rng.uniform_int(5));
    if (rng.uniform() < 0.05) c |= 1u << env::kChOtherAgent;
    if (rng.uniform() < 0.05) c |= 1u << env::kChBeam;
  }
  o.cells[(view / 2) * view + view / 2] |= 1u << env::kChSelf;
  return o;
}

// Orchard components under L1 distance <= 2, found by flood fill.
inline std::vector<std::vector<std::size_t>> orchard_components(const env::MapLayout& m) {
  std::vector<int> label(m.cells.size(), -1);
  std::vector<std::vector<std::size_t>> comps;
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    if (!m.orchard[i] || label[i] >= 0) continue;
    comps.emplace_back();
    std::vector<std::size_t> stack{i};
    label[i] = static_cast<int>(comps.size() - 1);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      comps.back().push_back(u);
      const int ur = static_cast<int>(u) / m.cols;
      const int uc = static_cast<int>(u) % m.cols;
      for (std::size_t v = 0; v < m.cells.size(); ++v) {
        const int d = std::abs(static_cast<int>(v) / m.cols - ur) + std::abs(static_cast<int>(v) % m.cols - uc);
        if (m.orchard[v] && label[v] < 0 && d <= 2) {
          label[v] = label[u];
          stack.push_back(v);
        }
      }
    }
  }
  return comps;
}

}  // namespace impactlab::test

#endif  // IMPACTLAB_TESTS_TEST_UTIL_HPP_
