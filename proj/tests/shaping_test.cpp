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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "impactlab/core/rng.hpp"
#include "impactlab/shaping.hpp"
#include "oracles.hpp"

namespace impactlab::shaping {
namespace {

std::vector<double> draw(CounterRng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

TEST(Smoothing, FirstStepEqualsReward) {
  ShapingState s(3);
  const std::vector<double> e{1.5, -2.0, 0.0};
  update_smoothed(s, e, 0.99, 0.975);
  EXPECT_EQ(s.w, e);
}

TEST(Smoothing, OneThenZero) {
  ShapingState s(1);
  update_smoothed(s, std::vector<double>{1.0}, 0.99, 0.975);
  update_smoothed(s, std::vector<double>{0.0}, 0.99, 0.975);
  EXPECT_NEAR(s.w[0], 0.96525, 1e-15);
}

TEST(Smoothing, MatchesClosedFormOnRandomStreams) {
  CounterRng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const double gamma = rng.uniform();
    const double lambda = rng.uniform();
    const auto e = draw(rng, 50, -50.0, 5.0);
    ShapingState s(1);
    for (std::size_t t = 0; t < e.size(); ++t) {
      update_smoothed(s, std::span<const double>(&e[t], 1), gamma, lambda);
      const std::vector<double> prefix(e.begin(), e.begin() + static_cast<long>(t) + 1);
      ASSERT_NEAR(s.w[0], oracle::smoothed_closed_form(prefix, gamma, lambda), 1e-12);
    }
  }
}

TEST(Smoothing, LinearInRewards) {
  CounterRng rng(2);
  ShapingState a(4), b(4), ab(4);
  for (int t = 0; t < 100; ++t) {
    const auto ea = draw(rng, 4, -1, 1);
    const auto eb = draw(rng, 4, -1, 1);
    std::vector<double> sum(4);
    for (int j = 0; j < 4; ++j) sum[j] = ea[j] + eb[j];
    update_smoothed(a, ea, 0.99, 0.975);
    update_smoothed(b, eb, 0.99, 0.975);
    update_smoothed(ab, sum, 0.99, 0.975);
    for (int j = 0; j < 4; ++j) ASSERT_NEAR(ab.w[j], a.w[j] + b.w[j], 1e-12);
  }
}

// Worked examples index agents from 0: "the first agent" is k = 0.
TEST(Inequity, WorkedExamples) {
  const std::vector<double> envy_w{2, 4, 6};
  const std::vector<double> guilt_w{6, 2, 4};
  EXPECT_NEAR(ia_intrinsic(envy_w, 0, 5.0, 0.0), -15.0, 1e-12);
  EXPECT_NEAR(ia_intrinsic(guilt_w, 0, 0.0, 0.05), -0.15, 1e-12);
  EXPECT_NEAR(emurel_intrinsic(envy_w, std::vector<double>{0.5, 0.5}, 0, 5.0, 0.0), -2.5, 1e-12);
  EXPECT_NEAR(emurel_intrinsic(guilt_w, std::vector<double>{0.0, 0.0}, 0, 0.0, 0.05), -0.3, 1e-12);
  EXPECT_EQ(ia_intrinsic(std::vector<double>{3, 3, 3}, 1, 5.0, 0.05), 0.0);
}

TEST(Inequity, Rejections) {
  EXPECT_THROW(ia_intrinsic(std::vector<double>{1.0}, 0, 1, 1), std::invalid_argument);
  EXPECT_THROW(emurel_intrinsic(std::vector<double>{1.0, 2.0}, std::vector<double>{1.5}, 0, 1, 1), std::invalid_argument);
  EXPECT_THROW(emurel_intrinsic(std::vector<double>{1.0, 2.0}, std::vector<double>{-0.1}, 0, 1, 1), std::invalid_argument);
  EXPECT_THROW(emurel_intrinsic(std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{1.0}, 0, 1, 1),
               std::invalid_argument);
}

TEST(Inequity, OracleAgreementSignAndReduction) {
  CounterRng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(9);
    const auto w = draw(rng, n, -20.0, 20.0);
    const auto d = draw(rng, n - 1, 0.0, 1.0);
    const std::vector<double> ones(n - 1, 1.0);
    const std::size_t k = rng.uniform_int(n);
    const double alpha = rng.uniform(0.0, 10.0);
    const double beta = rng.uniform(0.0, 1.0);
    const double ia = ia_intrinsic(w, k, alpha, beta);
    const double em = emurel_intrinsic(w, d, k, alpha, beta);
    ASSERT_NEAR(ia, oracle::scaled_inequity(w, ones, k, alpha, beta), 1e-12);
    ASSERT_NEAR(em, oracle::scaled_inequity(w, d, k, alpha, beta), 1e-12);
    ASSERT_NEAR(emurel_intrinsic(w, ones, k, alpha, beta), ia, 1e-12);
    ASSERT_LE(ia, 0.0);
    ASSERT_LE(em, 0.0);
  }
}

TEST(Inequity, AdvantageousMonotoneInImpact) {
  CounterRng rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(6);
    const auto w = draw(rng, n, 0.0, 10.0);
    auto d = draw(rng, n - 1, 0.0, 1.0);
    const std::size_t k = rng.uniform_int(n);
    const std::size_t m = rng.uniform_int(n - 1);
    const std::size_t j = m < k ? m : m + 1;
    if (!(w[k] > d[m] * w[j])) continue;
    const double before = emurel_intrinsic(w, d, k, 0.0, 0.05);
    d[m] *= rng.uniform();
    ASSERT_LE(emurel_intrinsic(w, d, k, 0.0, 0.05), before + 1e-15);
  }
}

TEST(Reshape, Combination) {
  EXPECT_EQ(reshape(1.0, -2.5, 1.0, 1.0), -1.5);
  EXPECT_EQ(reshape(3.0, 0.0, 0.5, 7.0), 1.5);
  EXPECT_EQ(reshape(3.0, -9.0, 1.0, 0.0), 3.0);
}

TEST(ShapeStep, ModesAndInvariant) {
  const std::vector<double> e{1.0, 0.0, -1.0};
  const std::vector<std::vector<double>> d{{0.5, 1.0}, {0.0, 1.0}, {1.0, 0.2}};
  for (auto mode : {ShapingMode::kBaseline, ShapingMode::kIa, ShapingMode::kEmurel}) {
    ShapingConfig cfg;
    cfg.mode = mode;
    cfg.alpha_k = 5.0;
    cfg.beta_k = 0.05;
    cfg.combine_alpha = 2.0;
    cfg.combine_beta = 0.5;
    ShapingState st(3);
    const auto out = shape_step(cfg, st, e, d);
    EXPECT_EQ(st.w, e);
    for (std::size_t k = 0; k < 3; ++k) {
      const double cb = mode == ShapingMode::kBaseline ? 0.0 : cfg.combine_beta;
      EXPECT_EQ(out.reshaped[k], cfg.combine_alpha * out.extrinsic[k] + cb * out.intrinsic[k]);
      if (mode == ShapingMode::kBaseline) EXPECT_EQ(out.intrinsic[k], 0.0);
      if (mode == ShapingMode::kIa) EXPECT_EQ(out.intrinsic[k], ia_intrinsic(e, k, 5.0, 0.05));
      if (mode == ShapingMode::kEmurel) EXPECT_EQ(out.intrinsic[k], emurel_intrinsic(e, d[k], k, 5.0, 0.05));
    }
  }
}

TEST(Gini, WorkedExamples) {
  EXPECT_EQ(gini_equality(std::vector<double>{3, 3, 3, 3}), 1.0);
  EXPECT_DOUBLE_EQ(gini_equality(std::vector<double>{7, 0, 0, 0}), 0.25);
  EXPECT_EQ(gini_equality(std::vector<double>{0, 0, 0}), 1.0);
  EXPECT_THROW(gini_equality(std::vector<double>{1, -1}), std::invalid_argument);
  EXPECT_THROW(gini_equality(std::vector<double>{}), std::invalid_argument);
}

TEST(Gini, OracleBoundsAndScaleInvariance) {
  CounterRng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(10);
    const auto r = draw(rng, n, 0.0, 100.0);
    const double g = gini_equality(r);
    ASSERT_NEAR(g, oracle::equality_sorted(r), 1e-12);
    ASSERT_GE(g, 0.0);
    ASSERT_LE(g, 1.0);
    const double c = rng.uniform(0.01, 100.0);
    std::vector<double> scaled(r);
    for (auto& x : scaled) x *= c;
    ASSERT_NEAR(gini_equality(scaled), g, 1e-12);
    std::vector<double> one_hot(n, 0.0);
    one_hot[rng.uniform_int(n)] = r[0] + 1.0;
    ASSERT_NEAR(gini_equality(one_hot), 1.0 / static_cast<double>(n), 1e-12);
  }
}

TEST(Config, Validation) {
  ShapingConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.beta_k = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_mode("emurel"), ShapingMode::kEmurel);
  EXPECT_THROW(parse_mode("si"), std::invalid_argument);
}

}  // namespace
}  // namespace impactlab::shaping
