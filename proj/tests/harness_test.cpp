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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "impactlab/harness.hpp"
#include "test_util.hpp"

namespace impactlab::harness {
namespace {

namespace fs = std::filesystem;

const char* kTinySpec = R"(name: tiny
output_dir: OUT
seeds: [4]
env:
  kind: cleanup
  map: cleanup_mini
  num_agents: 2
  episode_length: 20
  view_size: 5
method:
  mode: emurel
  beta_k: 0.05
trainer:
  updates: 2
  batch_steps: 40
  minibatch_steps: 20
  ppo_epochs: 1
  sequence_length: 10
  checkpoint_every: 1
eval:
  interval: 1
  episodes: 2
  last_steps: 40
)";

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::path(test::temp_path(name));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string tiny_spec(const fs::path& out) {
  std::string s = kTinySpec;
  s.replace(s.find("OUT"), 3, out.string());
  return s;
}

void expect_error_at(const std::string& text, std::size_t line, std::size_t col, const std::string& fragment) {
  try {
    parse_spec(text, "t.yaml");
    ADD_FAILURE() << "no error for:\n" << text;
  } catch (const SpecError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    EXPECT_EQ(e.column(), col) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    EXPECT_EQ(std::string(e.what()).rfind("t.yaml:" + std::to_string(line) + ":" + std::to_string(col) + ":", 0), 0u)
        << e.what();
  }
}

// --- spec parsing ---

TEST(Spec, ParsesAndAppliesDefaults) {
  const auto s = parse_spec(tiny_spec("/tmp/x"));
  EXPECT_EQ(s.name, "tiny");
  EXPECT_EQ(s.seeds, std::vector<std::uint64_t>{4});
  EXPECT_EQ(s.env.kind, env::GameKind::kCleanup);
  EXPECT_EQ(s.map_name, "cleanup_mini");
  EXPECT_EQ(s.env.view_size, 5u);
  EXPECT_EQ(s.method.mode, shaping::ShapingMode::kEmurel);
  EXPECT_EQ(s.method.alpha_k, 0.0);
  EXPECT_EQ(s.method.lambda, 0.975);
  EXPECT_EQ(s.trainer.updates, 2u);
  EXPECT_EQ(s.trainer.clip_ratio, 0.2);
  EXPECT_EQ(s.trainer.optimizer.learning_rate, 5e-4);
  EXPECT_FALSE(s.trainer.gae_lambda.has_value());
  EXPECT_EQ(s.eval.episodes, 2u);
}

TEST(Spec, UnknownMethodRejectedBeforeEnvSetup) {
  // The env section is also invalid (too many agents for the map's spawns);
  // the method error must win.
  std::string s = tiny_spec("/tmp/x");
  s.replace(s.find("mode: emurel"), 12, "mode: social");
  s.replace(s.find("num_agents: 2"), 13, "num_agents: 9");
  expect_error_at(s, 11, 9, "unknown");
}

TEST(Spec, DiagnosticsCarryPositions) {
  std::string s = tiny_spec("/tmp/x");
  s.replace(s.find("  ppo_epochs: 1"), 15, "  ppo_epoch: 1");
  expect_error_at(s, 17, 3, "unknown key 'trainer.ppo_epoch'");

  s = tiny_spec("/tmp/x");
  s.replace(s.find("updates: 2"), 10, "updates: two");
  expect_error_at(s, 14, 12, "trainer.updates");

  s = tiny_spec("/tmp/x");
  s.replace(s.find("batch_steps: 40"), 15, "batch_steps: -40");
  expect_error_at(s, 15, 16, "nonnegative");

  s = tiny_spec("/tmp/x");
  s.replace(s.find("kind: cleanup"), 13, "kind: orchard");
  expect_error_at(s, 5, 9, "unknown environment kind");

  expect_error_at("name: a\nseeds: [1\n", 3, 1, "");
  expect_error_at("method: {mode: ia}\nname: a\n", 1, 1, "missing required key 'seeds'");
}

TEST(Spec, SemanticErrorsPointAtTheirSection) {
  std::string s = tiny_spec("/tmp/x");
  s.replace(s.find("minibatch_steps: 20"), 19, "minibatch_steps: 80");
  expect_error_at(s, 14, 3, "minibatch_steps");

  s = tiny_spec("/tmp/x");
  s.replace(s.find("seeds: [4]"), 10, "seeds: []");
  expect_error_at(s, 3, 8, "seeds");

  s = tiny_spec("/tmp/x");
  s.replace(s.find("name: tiny"), 10, "name: a/b");
  expect_error_at(s, 1, 7, "name");
}

TEST(Spec, RoundTripIsAFixedPoint) {
  const auto a = parse_spec(tiny_spec("/tmp/x"));
  const std::string y1 = to_yaml(a);
  const auto b = parse_spec(y1);
  EXPECT_EQ(to_yaml(b), y1);
  EXPECT_EQ(b.env.map, a.env.map);
}

TEST(Spec, ShippedConfigsRoundTrip) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(fs::path(IMPACTLAB_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".yaml") continue;
    const auto s = load_spec(e.path());
    const std::string y = to_yaml(s);
    EXPECT_EQ(to_yaml(parse_spec(y)), y) << e.path();
    ++n;
  }
  EXPECT_GE(n, 6u);
}

TEST(Spec, MapFromFileAndInlineText) {
  const fs::path d = fresh_dir("spec_map");
  {
    std::ofstream f(d / "m.txt");
    f << "#####\n#P.P#\n#A~A#\n#####\n";
  }
  std::string s = tiny_spec("/tmp/x");
  s.replace(s.find("map: cleanup_mini"), 17, "map: m.txt");
  s.replace(s.find("view_size: 5"), 12, "view_size: 3");
  {
    std::ofstream f(d / "spec.yaml");
    f << s;
  }
  const auto spec = load_spec(d / "spec.yaml");
  EXPECT_TRUE(spec.map_name.empty());
  EXPECT_EQ(spec.env.map, "#####\n#P.P#\n#A~A#\n#####\n");
  const std::string y = to_yaml(spec);
  EXPECT_NE(y.find("map_text:"), std::string::npos);
  const auto again = parse_spec(y);
  EXPECT_EQ(again.env.map, spec.env.map);
  EXPECT_EQ(to_yaml(again), y);

  s.replace(s.find("map: m.txt"), 10, "map: missing.txt");
  EXPECT_THROW(parse_spec(s, "t.yaml", d), SpecError);
}

TEST(Spec, EnvironmentOverrides) {
  auto s = parse_spec(tiny_spec("/tmp/x"));
  ::setenv("IMPACTLAB_OUTPUT_DIR", "/tmp/elsewhere", 1);
  ::setenv("IMPACTLAB_WORKERS", "4", 1);
  apply_env_overrides(s);
  EXPECT_EQ(s.output_dir, "/tmp/elsewhere");
  EXPECT_EQ(s.trainer.workers, 4u);
  ::setenv("IMPACTLAB_WORKERS", "3", 1);  // 40 % 3 != 0
  EXPECT_THROW(apply_env_overrides(s), std::invalid_argument);
  ::setenv("IMPACTLAB_WORKERS", "x", 1);
  EXPECT_THROW(apply_env_overrides(s), std::invalid_argument);
  ::unsetenv("IMPACTLAB_OUTPUT_DIR");
  ::unsetenv("IMPACTLAB_WORKERS");
}

TEST(Spec, EnvOnlyDocumentForReplay) {
  const fs::path d = fresh_dir("env_only");
  {
    std::ofstream f(d / "env.yaml");
    f << "kind: harvest\nmap: harvest_mini\nnum_agents: 3\nepisode_length: 7\n";
  }
  const auto s = load_env_spec(d / "env.yaml");
  EXPECT_EQ(s.env.kind, env::GameKind::kHarvest);
  EXPECT_EQ(s.env.num_agents, 3u);
  EXPECT_EQ(s.env.episode_length, 7u);
}

// --- statistics ---

TEST(Stats, HandComputedExamples) {
  const auto s = sample_stats({10.0, 20.0, 30.0});
  EXPECT_DOUBLE_EQ(s.mean, 20.0);
  EXPECT_DOUBLE_EQ(s.variance, 100.0);
  EXPECT_DOUBLE_EQ(s.band, 1.96 * std::sqrt(100.0 / 3.0));
  const auto one = sample_stats({7.0});
  EXPECT_EQ(one.mean, 7.0);
  EXPECT_EQ(one.variance, 0.0);
  EXPECT_EQ(one.band, 0.0);
}

TEST(Stats, NumbersRoundTripThroughText) {
  CounterRng rng(3, 4);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.uniform_int(20)) - 10.0);
    EXPECT_EQ(*parse_number(format_number(v)), v);
  }
  EXPECT_FALSE(parse_number("").has_value());
  EXPECT_THROW(parse_number("1,5"), std::invalid_argument);
}

// Writes a fake run directory with one metrics row per (episodes, collective).
void fake_run(const fs::path& root, const std::string& method, std::uint64_t seed,
              const std::vector<double>& collective, double beta = 0.05, std::size_t updates = 5) {
  std::string s = tiny_spec(root);
  s.replace(s.find("mode: emurel"), 12, "mode: " + method);
  s.replace(s.find("beta_k: 0.05"), 12, "beta_k: " + format_number(beta));
  s.replace(s.find("updates: 2"), 10, "updates: " + std::to_string(updates));
  auto spec = parse_spec(s);
  spec.seeds = {seed};
  const fs::path dir = run_directory(spec, seed);
  fs::create_directories(dir);
  std::ofstream(dir / "config.yaml") << to_yaml(spec);
  std::ofstream csv(dir / "metrics.csv");
  csv << metrics_header();
  for (std::size_t u = 0; u < collective.size(); ++u) {
    train::UpdateMetrics m;
    m.update = u + 1;
    m.env_steps = (u + 1) * 40;
    m.episodes = 2;
    m.collective = collective[u];
    m.equality = 0.5;
    csv << metrics_row(m, std::nullopt);
  }
}

TEST(Summarize, MeansVarianceAndTrim) {
  const fs::path root = fresh_dir("summarize_basic");
  fake_run(root, "ia", 0, {0, 10});
  fake_run(root, "ia", 1, {0, 20});
  fake_run(root, "ia", 2, {0, 30});
  fake_run(root, "emurel", 0, {0, 5});
  fake_run(root, "emurel", 1, {0, 1});
  fake_run(root, "emurel", 2, {0, 9});
  fake_run(root, "emurel", 3, {0, 7});
  const auto t = summarize({root}, 40, false);
  ASSERT_EQ(t.methods.size(), 2u);
  const auto& em = t.methods[0];
  const auto& ia = t.methods[1];
  EXPECT_EQ(ia.method, "ia");
  EXPECT_DOUBLE_EQ(ia.collective.mean, 20.0);
  EXPECT_DOUBLE_EQ(ia.collective.variance, 100.0);
  EXPECT_EQ(em.runs, 4u);
  // Window of 80 steps covers both rows: (0 + 10) / 2 = 5 etc.
  const auto wide = summarize({root}, 80, false);
  EXPECT_DOUBLE_EQ(wide.methods[1].collective.mean, 10.0);

  const auto trimmed = summarize({root}, 40, true);
  EXPECT_EQ(trimmed.methods[0].collective.n, 2u);  // 4 seeds minus best and worst
  EXPECT_EQ(trimmed.methods[0].seeds, (std::vector<std::uint64_t>{0, 3}));
  EXPECT_DOUBLE_EQ(trimmed.methods[0].collective.mean, 6.0);
  EXPECT_EQ(trimmed.methods[1].collective.n, 1u);
  EXPECT_EQ(trimmed.methods[1].collective.band, 0.0);

  // Curves: two updates per method with per-update means.
  std::size_t ia_points = 0;
  for (const auto& p : t.curves) {
    if (p.method != "ia") continue;
    ++ia_points;
    EXPECT_DOUBLE_EQ(p.collective.mean, p.update == 1 ? 0.0 : 20.0);
  }
  EXPECT_EQ(ia_points, 2u);
  const std::string csv = format_summary_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "method,runs,kept,collective_mean,collective_variance,collective_band,equality_mean,equality_variance,"
            "equality_band");
}

TEST(Summarize, TrimNeedsThreeRuns) {
  const fs::path root = fresh_dir("summarize_trim");
  fake_run(root, "ia", 0, {1});
  fake_run(root, "ia", 1, {2});
  EXPECT_THROW(summarize({root}, 40, true), std::invalid_argument);
}

TEST(Summarize, InconsistentSpecsRejected) {
  const fs::path a = fresh_dir("summarize_incons_a");
  fake_run(a, "ia", 0, {1});
  fake_run(a, "ia", 1, {2}, 0.1);  // different method parameters
  EXPECT_THROW(summarize({a}, 40, false), std::invalid_argument);

  const fs::path b = fresh_dir("summarize_incons_b");
  fake_run(b, "ia", 0, {1});
  fake_run(b, "emurel", 0, {1}, 0.05, 9);  // different trainer
  EXPECT_THROW(summarize({b}, 40, false), std::invalid_argument);

  const fs::path c = fresh_dir("summarize_incons_c");
  fake_run(c, "ia", 0, {1});
  fake_run(c, "baseline", 0, {1}, 0.0);  // methods may differ in their own parameters
  EXPECT_NO_THROW(summarize({c}, 40, false));
  EXPECT_THROW(summarize({fresh_dir("summarize_empty")}, 40, false), std::invalid_argument);
}

// --- full runs ---

TEST(Run, ArtifactsAreCompleteAndDeterministic) {
  const fs::path root = fresh_dir("run_full");
  auto spec = parse_spec(tiny_spec(root));
  std::size_t hooks = 0;
  const auto res = run_seed(spec, 4, [&](const ExperimentSpec&, std::uint64_t, const train::UpdateMetrics&) { ++hooks; });
  EXPECT_EQ(hooks, 2u);
  const fs::path dir = root / "tiny" / "emurel" / "4";
  EXPECT_EQ(res.dir, dir);
  for (const char* f : {"config.yaml", "metrics.csv", "events.jsonl", "summary.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir / "FAILED"));
  for (const char* f : {"agent_0_step_40.ckpt", "agent_1_step_40.ckpt", "agent_0_step_80.ckpt", "agent_1_step_80.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir / "checkpoints" / f)) << f;
  }
  const auto table = read_metrics(dir / "metrics.csv");
  EXPECT_EQ(table.columns, metrics_columns());
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_TRUE(table.at(0, "eval_collective").has_value());
  EXPECT_TRUE(table.at(1, "eval_collective").has_value());

  // Summary is recomputable from the CSV alone.
  const auto again = summary_from_metrics(table, spec.eval.last_steps);
  for (const char* k : {"collective", "equality", "eval_collective", "env_steps", "updates"}) {
    EXPECT_EQ(res.summary[k], again[k]) << k;
  }

  // Snapshot re-run as a spec reproduces the snapshot and the metrics.
  const std::string snapshot = test::read_file((dir / "config.yaml").string());
  const std::string csv1 = test::read_file((dir / "metrics.csv").string());
  const auto respec = load_spec(dir / "config.yaml");
  EXPECT_EQ(to_yaml(respec), snapshot);
  const auto res2 = run_seed(respec, 4);
  EXPECT_EQ(test::read_file((dir / "metrics.csv").string()), csv1);
  EXPECT_EQ(test::read_file((dir / "config.yaml").string()), snapshot);
  EXPECT_EQ(res2.summary.dump(), res.summary.dump());
}

TEST(Run, FailureLeavesMarkerAndPartialArtifacts) {
  const fs::path root = fresh_dir("run_fail");
  auto spec = parse_spec(tiny_spec(root));
  EXPECT_THROW(run_seed(spec, 4,
                        [](const ExperimentSpec&, std::uint64_t, const train::UpdateMetrics& m) {
                          if (m.update == 1) throw std::runtime_error("boom");
                        }),
               std::runtime_error);
  const fs::path dir = root / "tiny" / "emurel" / "4";
  EXPECT_TRUE(fs::exists(dir / "FAILED"));
  EXPECT_NE(test::read_file((dir / "FAILED").string()).find("boom"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "summary.json"));
  EXPECT_EQ(read_metrics(dir / "metrics.csv").rows.size(), 1u);
  EXPECT_NE(test::read_file((dir / "events.jsonl").string()).find("\"failure\""), std::string::npos);
}

TEST(Run, RefusesToOverwriteForeignDirectory) {
  const fs::path root = fresh_dir("run_foreign");
  auto spec = parse_spec(tiny_spec(root));
  const fs::path dir = run_directory(spec, 4);
  fs::create_directories(dir);
  std::ofstream(dir / "precious.txt") << "keep";
  EXPECT_THROW(run_seed(spec, 4), std::runtime_error);
  EXPECT_TRUE(fs::exists(dir / "precious.txt"));
}

// --- replay ---

TEST(Replay, FramesDeterministicAndCounted) {
  const fs::path root = fresh_dir("replay");
  auto spec = parse_spec(tiny_spec(root));
  run_seed(spec, 4);
  const fs::path ck = root / "tiny" / "emurel" / "4" / "checkpoints" / "agent_0_step_80.ckpt";
  ReplayOptions opt;
  opt.episodes = 3;
  opt.seed = 11;
  std::ostringstream a, b;
  const auto ra = replay(ck, spec.env, opt, a);
  replay(ck, spec.env, opt, b);
  EXPECT_EQ(ra.frames, 3u * spec.env.episode_length);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(ra.eval.episodes.size(), 3u);
  const auto first = a.str().substr(0, a.str().find('\n'));
  EXPECT_EQ(first, "episode 0 step 1");
  EXPECT_TRUE(append_replay_to_summary(ck, opt, ra));
  EXPECT_NE(test::read_file((ck.parent_path().parent_path() / "summary.json").string()).find("\"replays\""),
            std::string::npos);
}

TEST(Replay, LoadsSiblingCheckpoints) {
  const fs::path root = fresh_dir("replay_siblings");
  auto spec = parse_spec(tiny_spec(root));
  run_seed(spec, 4);
  const fs::path ck = root / "tiny" / "emurel" / "4" / "checkpoints" / "agent_1_step_40.ckpt";
  const auto files = replay_checkpoints(ck, 2);
  EXPECT_EQ(files[0].filename(), "agent_0_step_40.ckpt");
  EXPECT_EQ(files[1].filename(), "agent_1_step_40.ckpt");
  const auto learners = load_learners(ck, spec.env);
  EXPECT_NE(test::bits(learners[0]->nets.encoder.parameters()[0]->value),
            test::bits(learners[1]->nets.encoder.parameters()[0]->value));
  // A file with another name serves every agent.
  fs::copy_file(ck, ck.parent_path() / "shared.ckpt");
  const auto same = load_learners(ck.parent_path() / "shared.ckpt", spec.env);
  EXPECT_EQ(test::bits(same[0]->nets.encoder.parameters()[0]->value),
            test::bits(same[1]->nets.encoder.parameters()[0]->value));
}

TEST(Replay, ArityMismatchRejected) {
  const fs::path root = fresh_dir("replay_arity");
  auto spec = parse_spec(tiny_spec(root));
  run_seed(spec, 4);
  const fs::path ck = root / "tiny" / "emurel" / "4" / "checkpoints" / "agent_0_step_80.ckpt";
  env::EnvConfig three = spec.env;
  three.num_agents = 3;
  fs::copy_file(ck, ck.parent_path() / "agent_2_step_80.ckpt");
  std::ostringstream sink;
  EXPECT_THROW(replay(ck, three, ReplayOptions{}, sink), std::invalid_argument);
  env::EnvConfig wider = spec.env;
  wider.view_size = 7;
  EXPECT_THROW(replay(ck, wider, ReplayOptions{}, sink), std::invalid_argument);
}

}  // namespace
}  // namespace impactlab::harness
