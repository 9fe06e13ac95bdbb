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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "grad_suite.hpp"
#include "impactlab/agent.hpp"
#include "impactlab/eicm.hpp"
#include "test_util.hpp"

namespace impactlab::eicm {
namespace {

std::vector<double> normal_vec(std::size_t n, CounterRng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

std::vector<int> random_joint(std::size_t n, std::size_t a, CounterRng& rng) {
  std::vector<int> j(n);
  for (int& x : j) x = static_cast<int>(rng.uniform_int(a));
  return j;
}

// Reference: plain dense layers over the explicit input vector with the
// listed agents' action blocks zeroed.
std::vector<double> reference_forward(const ForwardModel& fm, const std::vector<double>& phi,
                                      const std::vector<double>& u, const std::vector<int>& joint,
                                      const std::vector<std::size_t>& removed) {
  std::vector<double> x(phi);
  x.insert(x.end(), u.begin(), u.end());
  auto oh = test::one_hot_joint(joint, fm.num_actions);
  for (std::size_t j : removed) std::fill_n(oh.begin() + static_cast<long>(j * fm.num_actions), fm.num_actions, 0.0);
  x.insert(x.end(), oh.begin(), oh.end());
  const auto h = nn::dense_infer(fm.hidden, x, nn::Activation::kRelu);
  return nn::dense_infer(fm.out, h, nn::Activation::kLinear);
}

struct Fixture {
  CounterRng rng{17};
  ForwardModel fm{1014, 128, 4, 9, 32, rng};
  std::vector<double> phi = normal_vec(1014, rng);
  std::vector<double> u = normal_vec(128, rng);
  std::vector<int> joint = random_joint(4, 9, rng);
};

TEST(Encode, ZeroObservationWithZeroBiasGivesZeroFeatures) {
  CounterRng rng(1);
  nn::Conv2d conv("conv", 3, 8, 6, rng);
  conv.bias.value.fill(0.0);
  env::Observation obs;
  obs.view = 15;
  obs.cells.assign(225, 0);
  const auto phi = encode(conv, obs);
  ASSERT_EQ(phi.size(), 1014u);
  EXPECT_TRUE(std::all_of(phi.begin(), phi.end(), [](double v) { return v == 0.0; }));
}

TEST(ForwardModel, ShapesAndZeroParameters) {
  Fixture f;
  EXPECT_EQ(f.fm.input_size(), 1014u + 128u + 36u);
  EXPECT_EQ(forward_predict(f.fm, f.phi, f.u, f.joint).size(), 1014u);
  for (auto* p : f.fm.parameters()) p->value.fill(0.0);
  const auto y = forward_predict(f.fm, f.phi, f.u, f.joint);
  EXPECT_TRUE(std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; }));
}

TEST(ForwardModel, InputErrors) {
  Fixture f;
  EXPECT_THROW(forward_predict(f.fm, std::vector<double>(10), f.u, f.joint), std::invalid_argument);
  EXPECT_THROW(forward_predict(f.fm, f.phi, f.u, std::vector<int>{0, 1}), std::invalid_argument);
  EXPECT_THROW(forward_predict(f.fm, f.phi, f.u, std::vector<int>{0, 1, 2, 9}), std::out_of_range);
  EXPECT_THROW(forward_predict_without(f.fm, f.phi, f.u, f.joint, 4), std::out_of_range);
  EXPECT_THROW(impact_row(f.fm, f.phi, f.u, f.joint, 4), std::out_of_range);
}

TEST(ForwardModel, MatchesDenseReferenceExactly) {
  Fixture f;
  EXPECT_EQ(forward_predict(f.fm, f.phi, f.u, f.joint), reference_forward(f.fm, f.phi, f.u, f.joint, {}));
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(forward_predict_without(f.fm, f.phi, f.u, f.joint, j),
              reference_forward(f.fm, f.phi, f.u, f.joint, {j}));
  }
}

// Removing an agent zeroes its block; it is not the same as a noop action.
TEST(ForwardModel, EliminationDiffersFromNoop) {
  Fixture f;
  auto noop = f.joint;
  noop[2] = static_cast<int>(env::Action::kNoop);
  EXPECT_NE(forward_predict_without(f.fm, f.phi, f.u, f.joint, 2), forward_predict(f.fm, f.phi, f.u, noop));
}

TEST(ForwardModel, ZeroedInputWeightsGiveZeroImpact) {
  Fixture f;
  const std::size_t j = 1;
  const std::size_t m = f.fm.hidden.out();
  auto w = f.fm.hidden.weight.value.data();
  for (std::size_t a = 0; a < 9; ++a) {
    const std::size_t row = 1014 + 128 + j * 9 + a;
    std::fill_n(w.begin() + static_cast<long>(row * m), m, 0.0);
  }
  EXPECT_EQ(forward_predict_without(f.fm, f.phi, f.u, f.joint, j), forward_predict(f.fm, f.phi, f.u, f.joint));
  EXPECT_EQ(compute_raw_impact(f.fm, f.phi, f.u, f.joint, j), 0.0);
  const auto row = impact_row(f.fm, f.phi, f.u, f.joint, 0);
  EXPECT_EQ(row.raw[0], 0.0);
}

TEST(ForwardModel, EliminationIsNotAdditive) {
  Fixture f;
  const auto full = forward_predict(f.fm, f.phi, f.u, f.joint);
  std::vector<double> summed(full.size(), 0.0);
  for (std::size_t j = 0; j < 4; ++j) {
    const auto w = forward_predict_without(f.fm, f.phi, f.u, f.joint, j);
    for (std::size_t i = 0; i < full.size(); ++i) summed[i] += full[i] - w[i];
  }
  const auto none = reference_forward(f.fm, f.phi, f.u, f.joint, {0, 1, 2, 3});
  double gap = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) gap = std::max(gap, std::abs(summed[i] - (full[i] - none[i])));
  EXPECT_GT(gap, 1e-6);
}

// Agent j's stored action does not enter the branch where j is removed.
TEST(ForwardModel, EliminationLocality) {
  Fixture f;
  for (std::size_t j = 0; j < 4; ++j) {
    for (int a = 0; a < 9; ++a) {
      auto other = f.joint;
      other[j] = a;
      EXPECT_EQ(forward_predict_without(f.fm, f.phi, f.u, other, j),
                forward_predict_without(f.fm, f.phi, f.u, f.joint, j));
    }
    auto moved = f.joint;
    const std::size_t m = (j + 1) % 4;
    moved[m] = (moved[m] + 1) % 9;
    EXPECT_NE(forward_predict_without(f.fm, f.phi, f.u, moved, j),
              forward_predict_without(f.fm, f.phi, f.u, f.joint, j));
  }
}

TEST(Impact, HandComputedDistance) {
  const std::vector<double> p{1.0, 0.0}, q{0.0, 1.0};
  EXPECT_EQ(half_squared_distance(p, q), 1.0);
  EXPECT_EQ(forward_loss(p, q), 1.0);
  EXPECT_EQ(forward_loss(p, p), 0.0);

  // Two features, no state, one action per agent. Agent 1's action switches
  // the prediction from (0, 1) to (1, 0).
  CounterRng rng(3);
  ForwardModel fm(2, 0, 2, 1, 2, rng);
  for (auto* prm : fm.parameters()) prm->value.fill(0.0);
  fm.hidden.bias.value[1] = 1.0;
  fm.hidden.weight.value.data()[3 * 2 + 0] = 1.0;
  fm.hidden.weight.value.data()[3 * 2 + 1] = -1.0;
  fm.out.weight.value.data()[0] = 1.0;
  fm.out.weight.value.data()[3] = 1.0;
  const std::vector<double> phi{0.0, 0.0};
  const std::vector<int> joint{0, 0};
  EXPECT_EQ(forward_predict(fm, phi, {}, joint), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(forward_predict_without(fm, phi, {}, joint, 1), (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(compute_raw_impact(fm, phi, {}, joint, 1), 1.0);
}

TEST(Impact, RowMatchesPairwiseComputationAndIsPure) {
  Fixture f;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto row = impact_row(f.fm, f.phi, f.u, f.joint, k);
    ASSERT_EQ(row.raw.size(), 3u);
    std::size_t m = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      if (j == k) continue;
      EXPECT_EQ(row.raw[m], compute_raw_impact(f.fm, f.phi, f.u, f.joint, j));
      EXPECT_GE(row.raw[m], 0.0);
      ++m;
    }
    const auto again = impact_row(f.fm, f.phi, f.u, f.joint, k);
    EXPECT_EQ(row.raw, again.raw);
    EXPECT_EQ(row.normalized, again.normalized);
    for (double d : row.normalized) {
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
    }
  }
}

TEST(Normalize, Examples) {
  const auto a = normalize_impacts(std::vector<double>{0.2, 0.5, 0.8});
  EXPECT_NEAR(a[0], 0.0, 1e-12);
  EXPECT_NEAR(a[1], 0.5, 1e-12);
  EXPECT_NEAR(a[2], 1.0, 1e-12);
  EXPECT_EQ(normalize_impacts(std::vector<double>{0.3, 0.3}), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(normalize_impacts(std::vector<double>{0.7}), (std::vector<double>{1.0}));
  EXPECT_THROW(normalize_impacts(std::vector<double>{0.1, -0.1}), std::invalid_argument);
  EXPECT_THROW(normalize_impacts(std::vector<double>{0.1, NAN}), std::invalid_argument);
  EXPECT_THROW(normalize_impacts(std::vector<double>{}), std::invalid_argument);
}

TEST(Normalize, RangeAndOrderOnRandomRows) {
  CounterRng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(9);
    std::vector<double> raw(n);
    for (double& x : raw) x = rng.uniform() < 0.2 ? 0.0 : std::exp(3.0 * rng.normal());
    const auto out = normalize_impacts(raw);
    const double lo = *std::min_element(raw.begin(), raw.end());
    const double hi = *std::max_element(raw.begin(), raw.end());
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(out[i], 0.0);
      EXPECT_LE(out[i], 1.0);
      if (hi > lo) EXPECT_NEAR(out[i], (raw[i] - lo) / (hi - lo), 1e-12);
      for (std::size_t j = 0; j < n; ++j) {
        if (raw[i] <= raw[j]) EXPECT_LE(out[i], out[j]);
      }
    }
  }
}

TEST(InverseModel, BlocksAndLossValues) {
  CounterRng rng(5);
  InverseModel im(1014, 128, 5, 9, 32, rng);
  const auto phi = normal_vec(1014, rng), phi2 = normal_vec(1014, rng), u = normal_vec(128, rng);
  const auto p = inverse_predict(im, phi, phi2, u);
  ASSERT_EQ(p.size(), 45u);
  for (std::size_t b = 0; b < 5; ++b) {
    EXPECT_NEAR(std::accumulate(p.begin() + static_cast<long>(b * 9), p.begin() + static_cast<long>(b * 9 + 9), 0.0),
                1.0, 1e-9);
  }
  EXPECT_GE(inverse_loss(p, random_joint(5, 9, rng), 9), 0.0);

  im.out.weight.value.fill(0.0);
  im.out.bias.value.fill(0.0);
  const auto uniform = inverse_predict(im, phi, phi2, u);
  EXPECT_NEAR(inverse_loss(uniform, std::vector<int>{0, 1, 2, 3, 4}, 9), 5.0 * std::log(9.0), 1e-12);

  std::vector<double> perfect(18, 0.0);
  perfect[3] = 1.0;
  perfect[9 + 7] = 1.0;
  EXPECT_LE(inverse_loss(perfect, std::vector<int>{3, 7}, 9), 1e-9);
  EXPECT_NEAR(inverse_loss(perfect, std::vector<int>{3, 6}, 9), -std::log(1e-10), 1e-9);
  EXPECT_THROW(inverse_predict(im, phi, u, u), std::invalid_argument);
  EXPECT_THROW(inverse_loss(perfect, std::vector<int>{3}, 9), std::invalid_argument);
}

TEST(Losses, GraphMatchesInference) {
  test::EicmInstance inst(9);
  const auto phi = nn::conv_infer(inst.conv, inst.obs.data(), 5);
  const auto phi_next = nn::conv_infer(inst.conv, inst.obs_next.data(), 5);
  const std::vector<double> u(inst.state.data().begin(), inst.state.data().end());
  {
    nn::Graph g;
    const double graph = g.value(inst.forward_loss(g))[0];
    EXPECT_EQ(graph, forward_loss(forward_predict(inst.fm, phi, u, inst.joint), phi_next));
  }
  {
    nn::Graph g;
    const double graph = g.value(inst.inverse_loss(g))[0];
    EXPECT_NEAR(graph, inverse_loss(inverse_predict(inst.im, phi, phi_next, u), inst.joint, 9), 1e-12);
  }
}

TEST(Gradients, ForwardLossThroughModelAndEncoder) {
  EXPECT_LT(test::worst_over_instances(5, 100, [](std::uint64_t s) {
              return test::eicm_gradient_error(s, test::EicmLoss::kForward);
            }),
            1e-4);
}

TEST(Gradients, InverseLossThroughModelAndEncoder) {
  EXPECT_LT(test::worst_over_instances(5, 200, [](std::uint64_t s) {
              return test::eicm_gradient_error(s, test::EicmLoss::kInverse);
            }),
            1e-4);
}

// L_F reaches the encoder; the inverse model is untouched by it and vice versa.
TEST(Gradients, LossesReachOnlyTheirParameters) {
  test::EicmInstance inst(10);
  nn::Graph g;
  const auto loss = inst.forward_loss(g);
  auto params = nn::concat_refs({inst.conv.parameters(), inst.fm.parameters(), inst.im.parameters()});
  const auto grads = nn::backprop(g, loss, nn::ConstParameterRefs(params.begin(), params.end()));
  auto norm = [](const nn::Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return s;
  };
  EXPECT_GT(norm(grads[0]), 0.0);
  EXPECT_GT(norm(grads[2]), 0.0);
  EXPECT_EQ(norm(grads[6]), 0.0);
  EXPECT_EQ(norm(grads[7]), 0.0);
}

// Fitting one frozen transition drives L_F to under 1e-3 of its start.
TEST(Fitting, ForwardModelOverfitsOneTransition) {
  CounterRng rng(11);
  agent::AgentSpec spec;
  agent::AgentNets nets(spec, rng);
  ForwardModel fm(1014, 128, 2, 9, 32, rng);
  const auto phi = agent::encode_features(nets.encoder, test::random_observation(rng));
  const auto phi_next = agent::encode_features(nets.encoder, test::random_observation(rng));
  const auto u = normal_vec(128, rng);
  const std::vector<int> joint{3, 5};
  const nn::Tensor t_phi({1, 1014}, phi), t_next({1, 1014}, phi_next), t_u({1, 128}, u);
  const nn::Tensor t_joint({1, 18}, test::one_hot_joint(joint, 9));
  auto params = fm.parameters();
  nn::Optimizer opt({nn::OptimizerKind::kAdam, 1e-3}, params);
  const double initial = forward_loss(forward_predict(fm, phi, u, joint), phi_next);
  ASSERT_GT(initial, 0.0);
  for (int it = 0; it < 400; ++it) {
    nn::Graph g;
    const auto loss = nn::sum(g, forward_loss_graph(g, fm, g.input(t_phi), g.input(t_u), g.input(t_joint),
                                                    g.input(t_next)));
    opt.step(nn::backprop(g, loss, nn::ConstParameterRefs(params.begin(), params.end())));
  }
  EXPECT_LT(forward_loss(forward_predict(fm, phi, u, joint), phi_next), 1e-3 * initial);
}

TEST(Fitting, InverseModelOverfitsOneTransition) {
  CounterRng rng(12);
  InverseModel im(54, 4, 3, 9, 32, rng);
  const auto phi = normal_vec(54, rng), phi2 = normal_vec(54, rng), u = normal_vec(4, rng);
  const std::vector<int> joint{8, 0, 4};
  auto params = im.parameters();
  nn::Optimizer opt({nn::OptimizerKind::kAdam, 1e-2}, params);
  for (int it = 0; it < 200; ++it) {
    nn::Graph g;
    const auto loss = nn::sum(g, inverse_loss_graph(g, im, g.input(nn::Tensor({1, 54}, phi)),
                                                    g.input(nn::Tensor({1, 54}, phi2)),
                                                    g.input(nn::Tensor({1, 4}, u)), joint));
    opt.step(nn::backprop(g, loss, nn::ConstParameterRefs(params.begin(), params.end())));
  }
  const auto p = inverse_predict(im, phi, phi2, u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_GT(p[j * 9 + static_cast<std::size_t>(joint[j])], 0.99);
}

}  // namespace
}  // namespace impactlab::eicm
