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


#ifndef IMPACTLAB_HARNESS_REPLAY_HPP_
#define IMPACTLAB_HARNESS_REPLAY_HPP_

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/env/render.hpp"
#include "impactlab/harness/spec.hpp"
#include "impactlab/train.hpp"

namespace impactlab::harness {

namespace fs = std::filesystem;

struct ReplayOptions {
  std::size_t episodes = 1;
  std::uint64_t seed = 0;
  bool greedy = false;
};

// Checkpoint file per agent. A file named agent_<k>_step_<n>.ckpt pulls in
// its siblings agent_<j>_step_<n>.ckpt; any other name is used for every
// agent.
inline std::vector<fs::path> replay_checkpoints(const fs::path& ckpt, std::size_t num_agents) {
  static const std::regex pattern(R"(agent_(\d+)_step_(\d+)\.ckpt)");
  std::smatch m;
  const std::string name = ckpt.filename().string();
  std::vector<fs::path> out;
  if (std::regex_match(name, m, pattern)) {
    for (std::size_t j = 0; j < num_agents; ++j) {
      const fs::path p = ckpt.parent_path() / ("agent_" + std::to_string(j) + "_step_" + m[2].str() + ".ckpt");
      if (!fs::exists(p)) throw std::invalid_argument("replay: missing checkpoint '" + p.string() + "'");
      out.push_back(p);
    }
  } else {
    out.assign(num_agents, ckpt);
  }
  return out;
}

inline train::LearnerSet load_learners(const fs::path& ckpt, const env::EnvConfig& env_cfg) {
  const auto spec = train::agent_spec_for(env_cfg);
  auto learners = train::make_learners(spec, 0, nn::OptimizerConfig{});
  const auto files = replay_checkpoints(ckpt, env_cfg.num_agents);
  for (std::size_t k = 0; k < learners.size(); ++k) {
    try {
      learners[k]->load(files[k].string());
    } catch (const std::exception& e) {
      throw std::invalid_argument("replay: checkpoint '" + files[k].string() + "' does not fit agent " +
                                  std::to_string(k) + " of this env: " + e.what());
    }
  }
  return learners;
}

inline nlohmann::json episode_json(std::size_t index, const train::EpisodeStats& ep) {
  return {{"episode", index},        {"returns", ep.returns},         {"collective", ep.collective()},
          {"equality", ep.equality()}, {"apples", ep.apples},         {"clean_beams", ep.clean_beams},
          {"punish_beams", ep.punish_beams}, {"hits", ep.hits}};
}

struct ReplayResult {
  train::EvalResult eval;
  std::size_t frames = 0;
};

// Frames go to `frames` as "episode E step T" followed by the ASCII grid.
inline ReplayResult replay(const fs::path& ckpt, const env::EnvConfig& env_cfg, const ReplayOptions& opt,
                           std::ostream& frames) {
  const auto learners = load_learners(ckpt, env_cfg);
  ReplayResult res;
  std::size_t current = static_cast<std::size_t>(-1), step = 0;
  res.eval = train::evaluate(learners, env_cfg, opt.episodes, opt.seed, opt.greedy,
                             [&](const env::EnvState& s, std::size_t ep) {
                               if (ep != current) {
                                 current = ep;
                                 step = 0;
                               }
                               ++step;
                               ++res.frames;
                               frames << "episode " << ep << " step " << step << "\n" << env::render_ascii(s) << "\n";
                             });
  return res;
}

// When `ckpt` sits in a run directory's checkpoints/, appends the replay to
// that run's summary.json under "replays". Returns whether it did.
inline bool append_replay_to_summary(const fs::path& ckpt, const ReplayOptions& opt, const ReplayResult& res) {
  const fs::path summary = ckpt.parent_path().parent_path() / "summary.json";
  if (ckpt.parent_path().filename() != "checkpoints" || !fs::exists(summary)) return false;
  nlohmann::json j;
  {
    std::ifstream f(summary, std::ios::binary);
    j = nlohmann::json::parse(f);
  }
  nlohmann::json eps = nlohmann::json::array();
  for (std::size_t i = 0; i < res.eval.episodes.size(); ++i) eps.push_back(episode_json(i, res.eval.episodes[i]));
  j["replays"].push_back({{"checkpoint", ckpt.filename().string()},
                          {"seed", opt.seed},
                          {"episodes", opt.episodes},
                          {"greedy", opt.greedy},
                          {"collective", res.eval.collective},
                          {"equality", res.eval.equality},
                          {"per_episode", eps}});
  std::ofstream f(summary, std::ios::binary | std::ios::trunc);
  f << j.dump(2) << "\n";
  return true;
}

}  // namespace impactlab::harness

#endif  // IMPACTLAB_HARNESS_REPLAY_HPP_
