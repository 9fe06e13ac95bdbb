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


#ifndef IMPACTLAB_HARNESS_SUMMARIZE_HPP_
#define IMPACTLAB_HARNESS_SUMMARIZE_HPP_

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "impactlab/harness/metrics.hpp"
#include "impactlab/harness/spec.hpp"

namespace impactlab::harness {

namespace fs = std::filesystem;

struct RunRecord {
  fs::path dir;
  ExperimentSpec spec;
  std::uint64_t seed = 0;
  MetricsTable metrics;
  double collective = 0.0;  // window means
  double equality = 0.0;
};

struct MethodSummary {
  std::string method;
  std::size_t runs = 0;  // before trimming
  SampleStats collective;
  SampleStats equality;
  std::vector<std::uint64_t> seeds;  // kept after trimming
};

struct CurvePoint {
  std::string method;
  std::size_t update = 0;
  double env_steps = 0.0;
  SampleStats collective;
  SampleStats equality;
};

struct SummaryTable {
  std::vector<MethodSummary> methods;
  std::vector<CurvePoint> curves;
};

// Run directories are those holding both config.yaml and metrics.csv, found
// by a recursive scan of each argument.
inline std::vector<fs::path> find_run_dirs(const std::vector<fs::path>& roots) {
  std::set<fs::path> found;
  auto is_run = [](const fs::path& d) { return fs::exists(d / "config.yaml") && fs::exists(d / "metrics.csv"); };
  for (const auto& root : roots) {
    if (!fs::is_directory(root)) throw std::invalid_argument("'" + root.string() + "' is not a directory");
    if (is_run(root)) found.insert(fs::weakly_canonical(root));
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_directory() && is_run(e.path())) found.insert(fs::weakly_canonical(e.path()));
    }
  }
  return {found.begin(), found.end()};
}

namespace detail {

// Spec text with the per-run fields blanked, for consistency checks.
inline std::string shared_part(ExperimentSpec s, bool keep_method) {
  s.seeds = {0};
  s.output_dir = "-";
  s.name = "-";
  if (!keep_method) s.method = shaping::ShapingConfig{};
  return to_yaml(s);
}

}  // namespace detail

inline SummaryTable summarize(const std::vector<fs::path>& roots, std::size_t last_steps, bool trim) {
  if (last_steps == 0) throw std::invalid_argument("summarize: --last-steps must be positive");
  const auto dirs = find_run_dirs(roots);
  if (dirs.empty()) throw std::invalid_argument("summarize: no run directories found");
  std::map<std::string, std::vector<RunRecord>> groups;
  std::optional<std::string> shared;
  std::optional<fs::path> shared_from;
  for (const auto& d : dirs) {
    RunRecord r;
    r.dir = d;
    r.spec = load_spec(d / "config.yaml");
    r.seed = r.spec.seeds.front();
    r.metrics = read_metrics(d / "metrics.csv");
    const WindowMean w = window_mean(r.metrics, last_steps);
    if (!w.collective) {
      throw std::invalid_argument("summarize: no completed episode within the last " + std::to_string(last_steps) +
                                  " steps of '" + d.string() + "'");
    }
    r.collective = *w.collective;
    r.equality = *w.equality;
    const std::string s = detail::shared_part(r.spec, false);
    if (!shared) {
      shared = s;
      shared_from = d;
    } else if (*shared != s) {
      throw std::invalid_argument("summarize: '" + d.string() + "' was run with a different env/trainer/eval spec than '" +
                                  shared_from->string() + "'");
    }
    auto& g = groups[r.spec.method_name()];
    if (!g.empty() && detail::shared_part(g.front().spec, true) != detail::shared_part(r.spec, true)) {
      throw std::invalid_argument("summarize: '" + d.string() + "' uses different " + r.spec.method_name() +
                                  " parameters than '" + g.front().dir.string() + "'");
    }
    for (const auto& other : g) {
      if (other.seed == r.seed) {
        throw std::invalid_argument("summarize: seed " + std::to_string(r.seed) + " of " + r.spec.method_name() +
                                    " appears twice ('" + other.dir.string() + "', '" + d.string() + "')");
      }
    }
    g.push_back(std::move(r));
  }
  SummaryTable table;
  for (auto& [method, runs] : groups) {
    std::sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
    std::vector<const RunRecord*> kept;
    for (const auto& r : runs) kept.push_back(&r);
    if (trim) {
      if (kept.size() < 3) {
        throw std::invalid_argument("summarize: --trim needs at least 3 runs per method, " + method + " has " +
                                    std::to_string(kept.size()));
      }
      std::stable_sort(kept.begin(), kept.end(),
                       [](const RunRecord* a, const RunRecord* b) { return a->collective < b->collective; });
      kept = std::vector<const RunRecord*>(kept.begin() + 1, kept.end() - 1);
      std::sort(kept.begin(), kept.end(), [](const RunRecord* a, const RunRecord* b) { return a->seed < b->seed; });
    }
    MethodSummary ms;
    ms.method = method;
    ms.runs = runs.size();
    std::vector<double> c, e;
    for (const RunRecord* r : kept) {
      c.push_back(r->collective);
      e.push_back(r->equality);
      ms.seeds.push_back(r->seed);
    }
    ms.collective = sample_stats(c);
    ms.equality = sample_stats(e);
    table.methods.push_back(ms);

    // Learning curves over the updates every kept run reports a value for.
    std::size_t updates = kept.front()->metrics.rows.size();
    for (const RunRecord* r : kept) updates = std::min(updates, r->metrics.rows.size());
    for (std::size_t u = 0; u < updates; ++u) {
      std::vector<double> cu, eu;
      for (const RunRecord* r : kept) {
        const auto cv = r->metrics.at(u, "collective"), ev = r->metrics.at(u, "equality");
        if (cv && ev) {
          cu.push_back(*cv);
          eu.push_back(*ev);
        }
      }
      if (cu.size() != kept.size()) continue;
      CurvePoint p;
      p.method = method;
      p.update = u + 1;
      p.env_steps = kept.front()->metrics.at(u, "env_steps").value_or(0.0);
      p.collective = sample_stats(cu);
      p.equality = sample_stats(eu);
      table.curves.push_back(p);
    }
  }
  return table;
}

inline std::string format_summary_csv(const SummaryTable& t) {
  std::ostringstream o;
  o << "method,runs,kept,collective_mean,collective_variance,collective_band,equality_mean,equality_variance,"
       "equality_band\n";
  for (const auto& m : t.methods) {
    o << m.method << "," << m.runs << "," << m.collective.n << "," << format_number(m.collective.mean) << ","
      << format_number(m.collective.variance) << "," << format_number(m.collective.band) << ","
      << format_number(m.equality.mean) << "," << format_number(m.equality.variance) << ","
      << format_number(m.equality.band) << "\n";
  }
  return o.str();
}

inline std::string format_curves_csv(const SummaryTable& t) {
  std::ostringstream o;
  o << "method,update,env_steps,runs,collective_mean,collective_band,equality_mean,equality_band\n";
  for (const auto& p : t.curves) {
    o << p.method << "," << p.update << "," << format_number(p.env_steps) << "," << p.collective.n << ","
      << format_number(p.collective.mean) << "," << format_number(p.collective.band) << ","
      << format_number(p.equality.mean) << "," << format_number(p.equality.band) << "\n";
  }
  return o.str();
}

}  // namespace impactlab::harness

#endif  // IMPACTLAB_HARNESS_SUMMARIZE_HPP_
