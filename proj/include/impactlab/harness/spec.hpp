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


#ifndef IMPACTLAB_HARNESS_SPEC_HPP_
#define IMPACTLAB_HARNESS_SPEC_HPP_

// Experiment spec: a YAML document with the sections name, output_dir,
// seeds, env, method, trainer and eval. Unknown keys are errors. Every
// diagnostic carries the 1-based line and column of the offending node.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/env/config.hpp"
#include "impactlab/env/maps.hpp"
#include "impactlab/harness/format.hpp"
#include "impactlab/shaping.hpp"
#include "impactlab/train/config.hpp"

namespace impactlab::harness {

class SpecError : public std::runtime_error {
 public:
  SpecError(const std::string& origin, std::size_t line, std::size_t column, const std::string& msg)
      : std::runtime_error(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct EvalConfig {
  std::size_t interval = 0;  // updates between evaluations; 0: after the last update only
  std::size_t episodes = 10;
  std::size_t last_steps = 20000;  // summary window, env steps
};

struct ExperimentSpec {
  std::string name;
  std::string output_dir = "runs";
  std::vector<std::uint64_t> seeds;
  env::EnvConfig env;
  std::string map_name;  // builtin map name; empty when env.map came from a file or inline text
  shaping::ShapingConfig method;
  train::TrainerConfig trainer;
  EvalConfig eval;

  std::string method_name() const { return std::string(shaping::to_string(method.mode)); }
};

namespace detail {

class Reader {
 public:
  Reader(const YAML::Node& node, std::string path, const std::string& origin)
      : node_(node), path_(std::move(path)), origin_(origin) {
    if (!node_.IsMap()) fail(node_, "'" + path_ + "' must be a mapping");
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    const YAML::Mark m = n.Mark();
    const std::size_t line = m.line >= 0 ? static_cast<std::size_t>(m.line) + 1 : 0;
    const std::size_t col = m.column >= 0 ? static_cast<std::size_t>(m.column) + 1 : 0;
    throw SpecError(origin_, line, col, msg);
  }

  const YAML::Node& node() const { return node_; }
  const std::string& origin() const { return origin_; }

  std::optional<YAML::Node> find(const std::string& key) {
    used_.insert(key);
    const YAML::Node n = node_[key];
    if (!n.IsDefined() || n.IsNull()) return std::nullopt;
    return n;
  }

  YAML::Node require(const std::string& key) {
    auto n = find(key);
    if (!n) fail(node_, "missing required key '" + qualified(key) + "'");
    return *n;
  }

  template <typename T>
  T scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, "'" + qualified(key) + "' must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + qualified(key) + "' has an invalid value '" + n.Scalar() + "'");
    }
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    auto n = find(key);
    if (!n) return fallback;
    const std::string text = n->IsScalar() ? n->Scalar() : "";
    if (!text.empty() && text[0] == '-') fail(*n, "'" + qualified(key) + "' must be a nonnegative integer");
    return static_cast<std::size_t>(scalar<std::uint64_t>(*n, key));
  }

  double real(const std::string& key, double fallback) {
    auto n = find(key);
    return n ? scalar<double>(*n, key) : fallback;
  }

  std::optional<double> optional_real(const std::string& key, std::optional<double> fallback) {
    used_.insert(key);
    const YAML::Node n = node_[key];
    if (!n.IsDefined()) return fallback;
    if (n.IsNull()) return std::nullopt;
    return scalar<double>(n, key);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    auto n = find(key);
    return n ? scalar<std::string>(*n, key) : fallback;
  }

  // Rejects keys that were never asked for.
  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const std::string key = it->first.as<std::string>();
      if (!used_.count(key)) fail(it->first, "unknown key '" + qualified(key) + "'");
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  YAML::Node node_;
  std::string path_;
  const std::string& origin_;
  std::set<std::string> used_;
};

template <typename Fn>
void checked(const Reader& r, const YAML::Node& n, Fn&& fn) {
  try {
    fn();
  } catch (const SpecError&) {
    throw;
  } catch (const std::exception& e) {
    r.fail(n, e.what());
  }
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

inline void read_env(Reader& e, const std::filesystem::path& base_dir, ExperimentSpec& spec) {
  const YAML::Node kind = e.require("kind");
  checked(e, kind, [&] { spec.env.kind = env::parse_game_kind(e.scalar<std::string>(kind, "kind")); });
  auto map = e.find("map");
  auto map_text = e.find("map_text");
  if (map && map_text) e.fail(*map_text, "give either 'env.map' or 'env.map_text', not both");
  if (map) {
    const std::string ref = e.scalar<std::string>(*map, "map");
    if (auto b = env::maps::builtin(ref)) {
      spec.env.map = std::string(*b);
      spec.map_name = ref;
    } else {
      std::filesystem::path p(ref);
      if (p.is_relative()) p = base_dir / p;
      std::ifstream f(p, std::ios::binary);
      if (!f) e.fail(*map, "map '" + ref + "' is neither a builtin name nor a readable file");
      std::ostringstream ss;
      ss << f.rdbuf();
      spec.env.map = ss.str();
    }
  } else if (map_text) {
    spec.env.map = e.scalar<std::string>(*map_text, "map_text");
  } else {
    e.fail(e.node(), "missing required key 'env.map' (or 'env.map_text')");
  }
  spec.env.num_agents = e.count("num_agents", spec.env.num_agents);
  spec.env.episode_length = e.count("episode_length", spec.env.episode_length);
  spec.env.view_size = e.count("view_size", spec.env.view_size);
  spec.env.initial_waste_fill = e.optional_real("initial_waste_fill", spec.env.initial_waste_fill);
  if (auto n = e.find("cleanup")) {
    detail::Reader c(*n, "env.cleanup", e.origin());
    spec.env.cleanup.depletion_threshold = c.real("depletion_threshold", spec.env.cleanup.depletion_threshold);
    spec.env.cleanup.max_apple_rate = c.real("max_apple_rate", spec.env.cleanup.max_apple_rate);
    spec.env.cleanup.waste_spawn_prob = c.real("waste_spawn_prob", spec.env.cleanup.waste_spawn_prob);
    c.finish();
  }
  if (auto n = e.find("harvest")) {
    detail::Reader h(*n, "env.harvest", e.origin());
    spec.env.harvest.low = h.real("low", spec.env.harvest.low);
    spec.env.harvest.mid = h.real("mid", spec.env.harvest.mid);
    spec.env.harvest.high = h.real("high", spec.env.harvest.high);
    h.finish();
  }
  if (auto n = e.find("beam")) {
    detail::Reader b(*n, "env.beam", e.origin());
    spec.env.beam.length = static_cast<int>(b.count("length", static_cast<std::size_t>(spec.env.beam.length)));
    spec.env.beam.width = static_cast<int>(b.count("width", static_cast<std::size_t>(spec.env.beam.width)));
    b.finish();
  }
  e.finish();
  checked(e, e.node(), [&] { env::validate(spec.env); });
}

}  // namespace detail

// `base_dir` resolves relative map file paths.
inline ExperimentSpec parse_spec(const std::string& text, const std::string& origin = "<spec>",
                                 const std::filesystem::path& base_dir = ".") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw SpecError(origin, static_cast<std::size_t>(e.mark.line) + 1, static_cast<std::size_t>(e.mark.column) + 1,
                    e.msg);
  }
  if (!root.IsDefined() || root.IsNull()) throw SpecError(origin, 1, 1, "empty spec");
  detail::Reader top(root, "", origin);
  ExperimentSpec spec;

  // The method is validated first so a bad method name never reaches env setup.
  {
    detail::Reader m(top.require("method"), "method", origin);
    const YAML::Node mode = m.require("mode");
    detail::checked(m, mode, [&] { spec.method.mode = shaping::parse_mode(m.scalar<std::string>(mode, "mode")); });
    spec.method.alpha_k = m.real("alpha_k", spec.method.alpha_k);
    spec.method.beta_k = m.real("beta_k", spec.method.beta_k);
    spec.method.lambda = m.real("lambda", spec.method.lambda);
    spec.method.gamma = m.real("gamma", spec.method.gamma);
    spec.method.combine_alpha = m.real("combine_alpha", spec.method.combine_alpha);
    spec.method.combine_beta = m.real("combine_beta", spec.method.combine_beta);
    m.finish();
    detail::checked(m, m.node(), [&] { spec.method.validate(); });
  }

  const YAML::Node name = top.require("name");
  spec.name = top.scalar<std::string>(name, "name");
  if (spec.name.empty() || spec.name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-") !=
                               std::string::npos || spec.name == "." || spec.name == "..") {
    top.fail(name, "'name' must be nonempty and use only letters, digits, '_', '.' and '-'");
  }
  spec.output_dir = top.text("output_dir", spec.output_dir);
  if (spec.output_dir.empty()) top.fail(top.node(), "'output_dir' must be nonempty");
  {
    const YAML::Node seeds = top.require("seeds");
    if (!seeds.IsSequence() || seeds.size() == 0) top.fail(seeds, "'seeds' must be a nonempty list");
    for (const auto& s : seeds) spec.seeds.push_back(top.scalar<std::uint64_t>(s, "seeds"));
  }

  {
    detail::Reader e(top.require("env"), "env", origin);
    detail::read_env(e, base_dir, spec);
  }

  {
    auto& t = spec.trainer;
    detail::Reader r(top.require("trainer"), "trainer", origin);
    if (auto n = r.find("algo")) detail::checked(r, *n, [&] { t.algo = train::parse_algo(r.scalar<std::string>(*n, "algo")); });
    t.updates = r.count("updates", t.updates);
    t.batch_steps = r.count("batch_steps", t.batch_steps);
    t.minibatch_steps = r.count("minibatch_steps", t.minibatch_steps);
    t.ppo_epochs = r.count("ppo_epochs", t.ppo_epochs);
    t.sequence_length = r.count("sequence_length", t.sequence_length);
    t.clip_ratio = r.real("clip_ratio", t.clip_ratio);
    t.gae_lambda = r.optional_real("gae_lambda", t.gae_lambda);
    t.value_coef = r.real("value_coef", t.value_coef);
    t.entropy_coef = r.real("entropy_coef", t.entropy_coef);
    t.moa_coef = r.real("moa_coef", t.moa_coef);
    t.forward_coef = r.real("forward_coef", t.forward_coef);
    t.inverse_coef = r.real("inverse_coef", t.inverse_coef);
    t.workers = r.count("workers", t.workers);
    t.checkpoint_every = r.count("checkpoint_every", t.checkpoint_every);
    if (auto n = r.find("optimizer")) {
      detail::Reader o(*n, "trainer.optimizer", origin);
      if (auto k = o.find("kind")) {
        const std::string kind = o.scalar<std::string>(*k, "kind");
        if (kind == "adam") t.optimizer.kind = nn::OptimizerKind::kAdam;
        else if (kind == "sgd") t.optimizer.kind = nn::OptimizerKind::kSgd;
        else o.fail(*k, "unknown optimizer '" + kind + "' (expected adam or sgd)");
      }
      t.optimizer.learning_rate = o.real("learning_rate", t.optimizer.learning_rate);
      t.optimizer.beta1 = o.real("beta1", t.optimizer.beta1);
      t.optimizer.beta2 = o.real("beta2", t.optimizer.beta2);
      t.optimizer.epsilon = o.real("epsilon", t.optimizer.epsilon);
      t.optimizer.grad_clip_norm = o.optional_real("grad_clip_norm", t.optimizer.grad_clip_norm);
      o.finish();
    }
    r.finish();
    detail::checked(r, r.node(), [&] { t.validate(); });
  }

  if (auto n = top.find("eval")) {
    detail::Reader r(*n, "eval", origin);
    spec.eval.interval = r.count("interval", spec.eval.interval);
    spec.eval.episodes = r.count("episodes", spec.eval.episodes);
    spec.eval.last_steps = r.count("last_steps", spec.eval.last_steps);
    r.finish();
    if (spec.eval.episodes == 0) r.fail(r.node(), "'eval.episodes' must be positive");
    if (spec.eval.last_steps == 0) r.fail(r.node(), "'eval.last_steps' must be positive");
  }
  top.finish();
  return spec;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read spec '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_spec(ss.str(), path.string(), path.parent_path().empty() ? "." : path.parent_path());
}

// Environment for replay: either a full experiment spec (its env section is
// used) or a document holding only the env mapping.
inline ExperimentSpec load_env_spec(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read spec '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string origin = path.string();
  const std::filesystem::path base = path.parent_path().empty() ? "." : path.parent_path();
  YAML::Node root;
  try {
    root = YAML::Load(ss.str());
  } catch (const YAML::ParserException& e) {
    throw SpecError(origin, static_cast<std::size_t>(e.mark.line) + 1, static_cast<std::size_t>(e.mark.column) + 1,
                    e.msg);
  }
  if (root.IsMap() && root["env"].IsDefined()) return parse_spec(ss.str(), origin, base);
  if (!root.IsMap()) throw SpecError(origin, 1, 1, "env spec must be a mapping");
  ExperimentSpec spec;
  detail::Reader e(root, "env", origin);
  detail::read_env(e, base, spec);
  return spec;
}

// Resolved spec as YAML. Parsing the result yields the same spec, and
// emitting that again yields the same text.
inline std::string to_yaml(const ExperimentSpec& s) {
  using detail::quote;
  auto num = [](double v) { return format_number(v); };
  std::ostringstream o;
  o << "name: " << quote(s.name) << "\n";
  o << "output_dir: " << quote(s.output_dir) << "\n";
  o << "seeds: [";
  for (std::size_t i = 0; i < s.seeds.size(); ++i) o << (i ? ", " : "") << s.seeds[i];
  o << "]\n";
  o << "env:\n";
  o << "  kind: " << env::to_string(s.env.kind) << "\n";
  if (!s.map_name.empty()) {
    o << "  map: " << quote(s.map_name) << "\n";
  } else {
    o << "  map_text: " << quote(s.env.map) << "\n";
  }
  o << "  num_agents: " << s.env.num_agents << "\n";
  o << "  episode_length: " << s.env.episode_length << "\n";
  o << "  view_size: " << s.env.view_size << "\n";
  o << "  initial_waste_fill: " << (s.env.initial_waste_fill ? num(*s.env.initial_waste_fill) : "~") << "\n";
  o << "  cleanup:\n";
  o << "    depletion_threshold: " << num(s.env.cleanup.depletion_threshold) << "\n";
  o << "    max_apple_rate: " << num(s.env.cleanup.max_apple_rate) << "\n";
  o << "    waste_spawn_prob: " << num(s.env.cleanup.waste_spawn_prob) << "\n";
  o << "  harvest:\n";
  o << "    low: " << num(s.env.harvest.low) << "\n";
  o << "    mid: " << num(s.env.harvest.mid) << "\n";
  o << "    high: " << num(s.env.harvest.high) << "\n";
  o << "  beam:\n";
  o << "    length: " << s.env.beam.length << "\n";
  o << "    width: " << s.env.beam.width << "\n";
  o << "method:\n";
  o << "  mode: " << shaping::to_string(s.method.mode) << "\n";
  o << "  alpha_k: " << num(s.method.alpha_k) << "\n";
  o << "  beta_k: " << num(s.method.beta_k) << "\n";
  o << "  lambda: " << num(s.method.lambda) << "\n";
  o << "  gamma: " << num(s.method.gamma) << "\n";
  o << "  combine_alpha: " << num(s.method.combine_alpha) << "\n";
  o << "  combine_beta: " << num(s.method.combine_beta) << "\n";
  const auto& t = s.trainer;
  o << "trainer:\n";
  o << "  algo: " << train::to_string(t.algo) << "\n";
  o << "  updates: " << t.updates << "\n";
  o << "  batch_steps: " << t.batch_steps << "\n";
  o << "  minibatch_steps: " << t.minibatch_steps << "\n";
  o << "  ppo_epochs: " << t.ppo_epochs << "\n";
  o << "  sequence_length: " << t.sequence_length << "\n";
  o << "  clip_ratio: " << num(t.clip_ratio) << "\n";
  o << "  gae_lambda: " << (t.gae_lambda ? num(*t.gae_lambda) : "~") << "\n";
  o << "  value_coef: " << num(t.value_coef) << "\n";
  o << "  entropy_coef: " << num(t.entropy_coef) << "\n";
  o << "  moa_coef: " << num(t.moa_coef) << "\n";
  o << "  forward_coef: " << num(t.forward_coef) << "\n";
  o << "  inverse_coef: " << num(t.inverse_coef) << "\n";
  o << "  workers: " << t.workers << "\n";
  o << "  checkpoint_every: " << t.checkpoint_every << "\n";
  o << "  optimizer:\n";
  o << "    kind: " << (t.optimizer.kind == nn::OptimizerKind::kAdam ? "adam" : "sgd") << "\n";
  o << "    learning_rate: " << num(t.optimizer.learning_rate) << "\n";
  o << "    beta1: " << num(t.optimizer.beta1) << "\n";
  o << "    beta2: " << num(t.optimizer.beta2) << "\n";
  o << "    epsilon: " << num(t.optimizer.epsilon) << "\n";
  o << "    grad_clip_norm: " << (t.optimizer.grad_clip_norm ? num(*t.optimizer.grad_clip_norm) : "~") << "\n";
  o << "eval:\n";
  o << "  interval: " << s.eval.interval << "\n";
  o << "  episodes: " << s.eval.episodes << "\n";
  o << "  last_steps: " << s.eval.last_steps << "\n";
  return o.str();
}

// IMPACTLAB_OUTPUT_DIR and IMPACTLAB_WORKERS override the loaded values.
inline void apply_env_overrides(ExperimentSpec& s) {
  if (const char* dir = std::getenv("IMPACTLAB_OUTPUT_DIR"); dir && *dir) s.output_dir = dir;
  if (const char* w = std::getenv("IMPACTLAB_WORKERS"); w && *w) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(w, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != std::string(w).size() || v == 0 || std::string(w)[0] == '-') {
      throw std::invalid_argument("IMPACTLAB_WORKERS must be a positive integer, got '" + std::string(w) + "'");
    }
    s.trainer.workers = static_cast<std::size_t>(v);
    s.trainer.validate();
  }
}

}  // namespace impactlab::harness

#endif  // IMPACTLAB_HARNESS_SPEC_HPP_
