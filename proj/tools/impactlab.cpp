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


// impactlab command-line entry point.
//   impactlab run <spec> [--seed S] [--quiet]
//   impactlab summarize <dirs...> --last-steps N [--trim] [--out F] [--curves F]
//   impactlab replay <ckpt> <env-spec> --episodes N --seed S [--out F] [--greedy]
//   impactlab validate <spec>
//   impactlab random <spec> --episodes N --seed S
// Exit status: 0 success, 1 run failure, 2 invalid spec or arguments.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "impactlab/harness.hpp"

namespace {

using namespace impactlab;

int cmd_run(const std::string& path, std::optional<std::uint64_t> only_seed, bool quiet) {
  harness::ExperimentSpec spec = harness::load_spec(path);
  harness::apply_env_overrides(spec);
  std::vector<std::uint64_t> seeds = spec.seeds;
  if (only_seed) seeds = {*only_seed};
  for (std::uint64_t seed : seeds) {
    harness::UpdateHook progress;
    if (!quiet) {
      progress = [](const harness::ExperimentSpec& s, std::uint64_t sd, const train::UpdateMetrics& m) {
        std::cerr << s.name << "/" << s.method_name() << "/" << sd << " update " << m.update << "/"
                  << s.trainer.updates << " steps " << m.env_steps << " collective "
                  << (m.collective ? harness::format_number(*m.collective) : std::string("-")) << "\n";
      };
    }
    const auto res = harness::run_seed(spec, seed, progress);
    std::cout << res.dir.string() << " " << res.summary.dump() << "\n";
  }
  return 0;
}

int cmd_summarize(const std::vector<std::string>& dirs, std::size_t last_steps, bool trim, const std::string& out,
                  const std::string& curves) {
  std::vector<std::filesystem::path> roots(dirs.begin(), dirs.end());
  const auto table = harness::summarize(roots, last_steps, trim);
  const std::string csv = harness::format_summary_csv(table);
  std::cout << csv;
  if (!out.empty()) std::ofstream(out, std::ios::binary) << csv;
  if (!curves.empty()) std::ofstream(curves, std::ios::binary) << harness::format_curves_csv(table);
  return 0;
}

int cmd_replay(const std::string& ckpt, const std::string& env_spec, const harness::ReplayOptions& opt,
               const std::string& out) {
  const auto spec = harness::load_env_spec(env_spec);
  harness::ReplayResult res;
  if (out.empty()) {
    res = harness::replay(ckpt, spec.env, opt, std::cout);
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    res = harness::replay(ckpt, spec.env, opt, f);
  }
  std::ostream& log = out.empty() ? std::cerr : std::cout;
  for (std::size_t i = 0; i < res.eval.episodes.size(); ++i) {
    log << harness::episode_json(i, res.eval.episodes[i]).dump() << "\n";
  }
  harness::append_replay_to_summary(ckpt, opt, res);
  return 0;
}

int cmd_validate(const std::string& path) {
  harness::ExperimentSpec spec = harness::load_spec(path);
  harness::apply_env_overrides(spec);
  std::cout << harness::to_yaml(spec);
  return 0;
}

int cmd_random(const std::string& path, std::size_t episodes, std::uint64_t seed) {
  const auto spec = harness::load_env_spec(path);
  const auto res = train::evaluate_random(spec.env, episodes, seed);
  for (std::size_t i = 0; i < res.episodes.size(); ++i) std::cout << harness::episode_json(i, res.episodes[i]).dump() << "\n";
  std::cout << nlohmann::json{{"collective", res.collective}, {"equality", res.equality}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"impactlab: impact-scaled inequity aversion on Cleanup and Harvest"};
  app.require_subcommand(1);

  std::string spec_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "train every seed of an experiment spec");
  run->add_option("spec", spec_path, "experiment spec (YAML)")->required();
  run->add_option("--seed", seed, "run only this seed");
  run->add_flag("--quiet", quiet, "no per-update progress on stderr");

  std::vector<std::string> dirs;
  std::size_t last_steps = 0;
  bool trim = false;
  std::string out, curves;
  auto* sum = app.add_subcommand("summarize", "compare methods over run directories");
  sum->add_option("dirs", dirs, "run directories or parents of run directories")->required();
  sum->add_option("--last-steps", last_steps, "window of final env steps per run")->required();
  sum->add_flag("--trim", trim, "drop the best and worst run of each method");
  sum->add_option("--out", out, "also write the table CSV here");
  sum->add_option("--curves", curves, "write per-update learning curves CSV here");

  std::string ckpt, env_spec;
  harness::ReplayOptions ropt;
  auto* rep = app.add_subcommand("replay", "render episodes of a checkpoint as ASCII frames");
  rep->add_option("checkpoint", ckpt, "agent checkpoint (siblings agent_<j>_step_<n>.ckpt are loaded too)")->required();
  rep->add_option("env-spec", env_spec, "experiment spec or env-only YAML")->required();
  rep->add_option("--episodes", ropt.episodes, "episodes")->required();
  rep->add_option("--seed", ropt.seed, "evaluation seed")->required();
  rep->add_option("--out", out, "write frames here instead of stdout");
  rep->add_flag("--greedy", ropt.greedy, "argmax actions instead of sampling");

  auto* val = app.add_subcommand("validate", "parse a spec and print the resolved config");
  val->add_option("spec", spec_path, "experiment spec (YAML)")->required();

  std::size_t episodes = 0;
  std::uint64_t rseed = 0;
  auto* rnd = app.add_subcommand("random", "evaluate uniformly random agents");
  rnd->add_option("spec", spec_path, "experiment spec or env-only YAML")->required();
  rnd->add_option("--episodes", episodes, "episodes")->required();
  rnd->add_option("--seed", rseed, "evaluation seed")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(spec_path, seed, quiet);
    if (*sum) return cmd_summarize(dirs, last_steps, trim, out, curves);
    if (*rep) return cmd_replay(ckpt, env_spec, ropt, out);
    if (*val) return cmd_validate(spec_path);
    if (*rnd) return cmd_random(spec_path, episodes, rseed);
  } catch (const harness::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
