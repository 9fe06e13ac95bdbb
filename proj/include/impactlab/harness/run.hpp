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


#ifndef IMPACTLAB_HARNESS_RUN_HPP_
#define IMPACTLAB_HARNESS_RUN_HPP_

// Run directory <output_dir>/<name>/<method>/<seed>/:
//   config.yaml     resolved spec for this seed alone
//   metrics.csv     one row per update (no wall-clock values)
//   events.jsonl    start / update / eval / checkpoint / finish records
//   checkpoints/    agent_<k>_step_<env_steps>.ckpt
//   summary.json    derived from metrics.csv
//   FAILED          present only when the run aborted

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/core/rng.hpp"
#include "impactlab/harness/metrics.hpp"
#include "impactlab/harness/spec.hpp"
#include "impactlab/train.hpp"

namespace impactlab::harness {

namespace fs = std::filesystem;

inline fs::path run_directory(const ExperimentSpec& spec, std::uint64_t seed) {
  return fs::path(spec.output_dir) / spec.name / spec.method_name() / std::to_string(seed);
}

inline std::string checkpoint_name(std::size_t agent, std::size_t env_steps) {
  return "agent_" + std::to_string(agent) + "_step_" + std::to_string(env_steps) + ".ckpt";
}

inline std::uint64_t eval_seed_for(std::uint64_t seed, std::size_t update) {
  return mix64(seed ^ 0x6576616c75617465ULL) + update;
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

// Summary record recomputed from a metrics CSV.
inline nlohmann::json summary_from_metrics(const MetricsTable& t, std::size_t last_steps) {
  nlohmann::json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  const WindowMean w = window_mean(t, last_steps);
  j["last_steps"] = last_steps;
  j["updates"] = t.rows.size();
  j["env_steps"] = t.rows.empty() ? 0.0 : t.at(t.rows.size() - 1, "env_steps").value_or(0.0);
  j["collective"] = opt(w.collective);
  j["equality"] = opt(w.equality);
  j["window_episodes"] = w.episodes;
  std::optional<double> ec, ee;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (auto c = t.at(r, "eval_collective")) {
      ec = c;
      ee = t.at(r, "eval_equality");
    }
  }
  j["eval_collective"] = opt(ec);
  j["eval_equality"] = opt(ee);
  return j;
}

class EventLog {
 public:
  explicit EventLog(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc), t0_(clock::now()) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  void write(nlohmann::json j) {
    j["wall_seconds"] = std::chrono::duration<double>(clock::now() - t0_).count();
    out_ << j.dump() << "\n";
    out_.flush();
  }

 private:
  using clock = std::chrono::steady_clock;
  std::ofstream out_;
  clock::time_point t0_;
};

struct RunResult {
  fs::path dir;
  nlohmann::json summary;
};

// Clears a previous run in `dir`; refuses to touch a directory that does not
// look like one.
inline void prepare_run_directory(const fs::path& dir) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir.string() + "' exists and is not a directory");
    if (!fs::is_empty(dir) && !fs::exists(dir / "config.yaml")) {
      throw std::runtime_error("refusing to overwrite '" + dir.string() + "': not a run directory");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir / "checkpoints");
}

inline void save_checkpoints(train::LearnerSet& learners, const fs::path& dir, std::size_t env_steps,
                             EventLog& events) {
  for (std::size_t k = 0; k < learners.size(); ++k) {
    const fs::path p = dir / "checkpoints" / checkpoint_name(k, env_steps);
    learners[k]->save(p.string());
    events.write({{"event", "checkpoint"}, {"agent", k}, {"env_steps", env_steps}, {"path", p.filename().string()}});
  }
}

// Called after each update's metrics row is written.
using UpdateHook = std::function<void(const ExperimentSpec&, std::uint64_t seed, const train::UpdateMetrics&)>;

inline RunResult run_seed(const ExperimentSpec& spec, std::uint64_t seed, const UpdateHook& on_update = {}) {
  ExperimentSpec one = spec;
  one.seeds = {seed};
  const fs::path dir = run_directory(one, seed);
  prepare_run_directory(dir);
  {
    std::ofstream f(dir / "config.yaml", std::ios::binary);
    f << to_yaml(one);
  }
  EventLog events(dir / "events.jsonl");
  events.write({{"event", "start"}, {"time_utc", utc_now()}, {"seed", seed}, {"name", one.name},
                {"method", one.method_name()}});
  std::ofstream csv(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
  csv << metrics_header();
  csv.flush();
  try {
    train::TrainerConfig tc = one.trainer;
    tc.seed = seed;
    train::Trainer trainer(one.env, one.method, tc);
    for (std::size_t u = 1; u <= tc.updates; ++u) {
      const train::UpdateMetrics m = trainer.step();
      std::optional<EvalPoint> eval;
      const bool last = u == tc.updates;
      if (last || (one.eval.interval > 0 && u % one.eval.interval == 0)) {
        const auto res = train::evaluate(trainer.learners(), one.env, one.eval.episodes, eval_seed_for(seed, u));
        eval = EvalPoint{res.collective, res.equality};
        events.write({{"event", "eval"}, {"update", u}, {"episodes", one.eval.episodes},
                      {"collective", res.collective}, {"equality", res.equality}});
      }
      csv << metrics_row(m, eval);
      csv.flush();
      events.write({{"event", "update"}, {"update", u}, {"env_steps", m.env_steps}});
      if (on_update) on_update(one, seed, m);
      if (last || (tc.checkpoint_every > 0 && u % tc.checkpoint_every == 0)) {
        save_checkpoints(trainer.learners(), dir, m.env_steps, events);
      }
    }
    csv.close();
    nlohmann::json summary = summary_from_metrics(read_metrics(dir / "metrics.csv"), one.eval.last_steps);
    summary["name"] = one.name;
    summary["method"] = one.method_name();
    summary["seed"] = seed;
    summary["status"] = "complete";
    {
      std::ofstream f(dir / "summary.json", std::ios::binary);
      f << summary.dump(2) << "\n";
    }
    events.write({{"event", "finish"}, {"time_utc", utc_now()}});
    return {dir, summary};
  } catch (const std::exception& e) {
    csv.close();
    std::ofstream(dir / "FAILED", std::ios::binary) << e.what() << "\n";
    events.write({{"event", "failure"}, {"error", e.what()}, {"time_utc", utc_now()}});
    throw;
  }
}

inline std::vector<RunResult> run_all(const ExperimentSpec& spec, const UpdateHook& on_update = {}) {
  std::vector<RunResult> out;
  for (std::uint64_t seed : spec.seeds) out.push_back(run_seed(spec, seed, on_update));
  return out;
}

}  // namespace impactlab::harness

#endif  // IMPACTLAB_HARNESS_RUN_HPP_
