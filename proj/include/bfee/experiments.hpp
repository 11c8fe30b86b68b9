// Copyright 2026 The beamform-ee Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Monte Carlo experiment harness: convergence traces, rate sweeps, antenna
// sweeps and single runs, written as CSV in a fixed schema.
//
// Realization i uses channel seed seed_base + i; the group assignment comes
// from the scenario and is shared by all realizations. Jobs run on a small
// worker pool and rows are emitted in a fixed order, so the output does not
// depend on scheduling or on the number of workers.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "bfee/error.hpp"
#include "bfee/metrics.hpp"
#include "bfee/mmse.hpp"
#include "bfee/scenario.hpp"
#include "bfee/sca.hpp"

namespace bfee::experiments {

enum class Kind { kConvergence, kSweepRate, kSweepAntennas, kSingle };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::kConvergence: return "convergence";
    case Kind::kSweepRate: return "sweep-rate";
    case Kind::kSweepAntennas: return "sweep-antennas";
    case Kind::kSingle: return "single";
  }
  return "unknown";
}

inline Kind kind_from_string(const std::string& s) {
  if (s == "convergence") return Kind::kConvergence;
  if (s == "sweep-rate") return Kind::kSweepRate;
  if (s == "sweep-antennas") return Kind::kSweepAntennas;
  if (s == "single") return Kind::kSingle;
  throw ConfigError("unknown experiment '" + s + "'");
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "joint") return Mode::kJoint;
  if (s == "multicast-only") return Mode::kMulticastOnly;
  throw ConfigError("unknown mode '" + s + "' (expected joint or multicast-only)");
}

struct ExperimentSpec {
  Kind kind = Kind::kSingle;
  ScenarioParams scenario;
  /// Rate targets in Mbit/s (convergence, sweep-rate, single) or receive
  /// antenna counts (sweep-antennas). Empty means the scenario's own value.
  std::vector<double> grid;
  std::size_t realizations = 20;
  std::uint64_t seed_base = 1;
  std::vector<Mode> modes = {Mode::kJoint};
  SolverOptions options;
  std::size_t workers = 1;

  void validate() const {
    if (realizations < 1) throw ConfigError("experiment: at least one realization is required");
    if (modes.empty()) throw ConfigError("experiment: no mode selected");
    if (workers < 1) throw ConfigError("experiment: at least one worker is required");
    for (double v : grid) {
      if (!std::isfinite(v) || v < 0.0) throw ConfigError("experiment: grid values must be >= 0");
      if (kind == Kind::kSweepAntennas && (v < 1.0 || v != std::floor(v))) {
        throw ConfigError("experiment: antenna grid values must be positive integers");
      }
    }
    options.validate();
    for (double v : effective_grid()) scenario_at(v);
  }

  /// Grid with the scenario default filled in.
  std::vector<double> effective_grid() const {
    if (!grid.empty()) return grid;
    if (kind == Kind::kSweepAntennas) return {static_cast<double>(scenario.M)};
    return {scenario.rate_target_mbps};
  }

  /// Scenario of one grid point.
  Scenario scenario_at(double grid_value) const {
    ScenarioParams p = scenario;
    if (kind == Kind::kSweepAntennas) {
      p.M = static_cast<std::size_t>(grid_value);
    } else {
      p.rate_target_mbps = grid_value;
    }
    return make_scenario(p);
  }
};

/// One CSV row. Numeric fields are NaN when the run produced no solution.
struct Row {
  std::string experiment;
  std::uint64_t seed = 0;
  int iter = 0;
  Mode mode = Mode::kJoint;
  std::size_t m = 0;
  std::size_t n = 0;
  double rate_target_mbps = 0.0;
  double ee_mbit_per_joule = std::nan("");
  double sum_rate_mbps = std::nan("");
  double total_power_w = std::nan("");
  long active_unicast_streams = -1;
  std::string status;
};

inline constexpr const char* kCsvHeader =
    "experiment,seed,iter,mode,M,N,rate_target_mbps,ee_mbit_per_joule,sum_rate_mbps,"
    "total_power_w,active_unicast_streams,status";

namespace detail {

inline std::string number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Status strings never contain commas or quotes; messages are kept out of
/// the CSV.
inline std::string status_of(Termination t) { return bfee::to_string(t); }

struct Job {
  std::uint64_t seed;
  double grid_value;
  Mode mode;
};

struct JobResult {
  std::vector<Row> rows;
  std::string diagnostic;  // non-empty when the run failed
};

inline Row base_row(const ExperimentSpec& spec, const Scenario& sc, const Job& job) {
  Row r;
  r.experiment = to_string(spec.kind);
  r.seed = job.seed;
  r.mode = job.mode;
  r.m = sc.topology.rx_antennas.empty() ? 0 : sc.topology.rx_antennas.front();
  r.n = sc.topology.bs_antennas.empty() ? 0 : sc.topology.bs_antennas.front();
  r.rate_target_mbps = sc.targets.common_bps.empty() ? 0.0 : sc.targets.common_bps.front() / 1e6;
  return r;
}

/// Final-state row with every value recomputed from the stored beams.
inline Row final_row(Row r, const IterateState& s, const Scenario& sc, const ChannelSet& h,
                     const SolverOptions& opt) {
  const auto rx = mmse_receivers(sc.topology, h, s.beams, sc.radio.noise_w);
  const auto rep = rates(sc, h, s.beams, rx);
  r.iter = s.iteration;
  r.ee_mbit_per_joule = rep.ee_bits_per_joule / 1e6;
  r.sum_rate_mbps = rep.sum_rate_bps / 1e6;
  r.total_power_w = rep.total_power_w;
  r.active_unicast_streams =
      static_cast<long>(count_active_unicast_streams(s, sc, opt.stream_active_threshold));
  r.status = status_of(s.termination);
  return r;
}

inline JobResult run_job(const ExperimentSpec& spec, const Job& job) {
  JobResult out;
  const Scenario sc = spec.scenario_at(job.grid_value);
  const Row base = base_row(spec, sc, job);
  SolverOptions opt = spec.options;
  opt.mode = job.mode;
  try {
    const auto h = generate_channels(sc.topology, sc.radio, job.seed);
    const auto s = run(sc, h, opt);
    if (spec.kind == Kind::kConvergence) {
      // Solved iterations only; the starting point is reported when no
      // iteration ran.
      for (const auto& rec : s.trace) {
        if (rec.iteration == 0 && s.iteration > 0) continue;
        Row r = base;
        r.iter = rec.iteration;
        r.ee_mbit_per_joule = rec.ee_bits_per_joule / 1e6;
        r.sum_rate_mbps = rec.sum_rate_bps / 1e6;
        r.total_power_w = rec.total_power_w;
        r.status = rec.iteration == s.iteration ? status_of(s.termination) : "running";
        out.rows.push_back(r);
      }
      if (!out.rows.empty()) {
        out.rows.back() = final_row(out.rows.back(), s, sc, h, opt);
      }
    } else {
      out.rows.push_back(final_row(base, s, sc, h, opt));
    }
    if (s.termination == Termination::kSolverFailure) out.diagnostic = s.message;
  } catch (const InfeasibleError& e) {
    Row r = base;
    r.status = "infeasible";
    out.rows = {r};
    out.diagnostic = e.what();
  } catch (const std::exception& e) {
    Row r = base;
    r.status = "solver-failure";
    out.rows = {r};
    out.diagnostic = e.what();
  }
  return out;
}

}  // namespace detail

/// Diagnostic for a failed or infeasible realization.
struct Diagnostic {
  std::uint64_t seed;
  Mode mode;
  double grid_value;
  std::string message;
};

struct Result {
  std::vector<Row> rows;
  std::vector<Diagnostic> diagnostics;
};

/// Runs every (seed, grid point, mode) job. Rows are ordered by seed, then
/// grid point in the given order, then mode in the given order.
inline Result run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto grid = spec.effective_grid();
  std::vector<detail::Job> jobs;
  for (std::size_t i = 0; i < spec.realizations; ++i) {
    for (double g : grid) {
      for (Mode m : spec.modes) jobs.push_back({spec.seed_base + i, g, m});
    }
  }
  std::vector<detail::JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      results[j] = detail::run_job(spec, jobs[j]);
    }
  };
  const std::size_t threads = std::min(spec.workers, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  Result out;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (auto& r : results[j].rows) out.rows.push_back(std::move(r));
    if (!results[j].diagnostic.empty()) {
      out.diagnostics.push_back(
          {jobs[j].seed, jobs[j].mode, jobs[j].grid_value, std::move(results[j].diagnostic)});
    }
  }
  return out;
}

inline ExperimentSpec with_kind(ExperimentSpec spec, Kind kind) {
  spec.kind = kind;
  return spec;
}

inline Result run_convergence(const ExperimentSpec& spec) {
  return run_experiment(with_kind(spec, Kind::kConvergence));
}
inline Result run_sweep_rate(const ExperimentSpec& spec) {
  return run_experiment(with_kind(spec, Kind::kSweepRate));
}
inline Result run_sweep_antennas(const ExperimentSpec& spec) {
  return run_experiment(with_kind(spec, Kind::kSweepAntennas));
}
inline Result run_single(const ExperimentSpec& spec) {
  return run_experiment(with_kind(spec, Kind::kSingle));
}

inline void write_csv(std::ostream& os, const std::vector<Row>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.experiment << ',' << r.seed << ',' << r.iter << ',' << bfee::to_string(r.mode) << ','
       << r.m << ',' << r.n << ',' << detail::number(r.rate_target_mbps) << ','
       << detail::number(r.ee_mbit_per_joule) << ',' << detail::number(r.sum_rate_mbps) << ','
       << detail::number(r.total_power_w) << ','
       << (r.active_unicast_streams < 0 ? std::string() : std::to_string(r.active_unicast_streams))
       << ',' << r.status << '\n';
  }
}

/// Monte Carlo statistics of the final rows of one (mode, M, rate) cell.
struct Summary {
  std::string experiment;
  Mode mode = Mode::kJoint;
  std::size_t m = 0;
  std::size_t n = 0;
  double rate_target_mbps = 0.0;
  std::size_t realizations = 0;
  std::size_t solved = 0;  // rows with an EE value
  double mean_ee_mbit_per_joule = std::nan("");
  double std_ee_mbit_per_joule = std::nan("");
  double mean_active_unicast_streams = std::nan("");
};

inline constexpr const char* kSummaryHeader =
    "experiment,mode,M,N,rate_target_mbps,realizations,solved,mean_ee_mbit_per_joule,"
    "std_ee_mbit_per_joule,mean_active_unicast_streams";

/// Groups final rows (the last row per seed for convergence traces) and
/// averages over the realizations that produced a solution. The sample
/// standard deviation needs two solved realizations.
inline std::vector<Summary> summarize(const std::vector<Row>& rows) {
  using Key = std::tuple<int, std::size_t, std::size_t, double>;
  std::map<std::tuple<Key, std::uint64_t>, const Row*> finals;
  std::vector<Key> order;
  for (const auto& r : rows) {
    const Key key{static_cast<int>(r.mode), r.m, r.n, r.rate_target_mbps};
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
    finals[{key, r.seed}] = &r;
  }
  std::vector<Summary> out;
  for (const auto& key : order) {
    Summary s;
    std::vector<double> ee;
    double active = 0.0;
    for (const auto& [k, row] : finals) {
      if (std::get<0>(k) != key) continue;
      s.experiment = row->experiment;
      s.mode = row->mode;
      s.m = row->m;
      s.n = row->n;
      s.rate_target_mbps = row->rate_target_mbps;
      ++s.realizations;
      if (std::isfinite(row->ee_mbit_per_joule)) {
        ee.push_back(row->ee_mbit_per_joule);
        active += static_cast<double>(std::max(0L, row->active_unicast_streams));
      }
    }
    s.solved = ee.size();
    if (!ee.empty()) {
      double mean = 0.0;
      for (double v : ee) mean += v;
      mean /= static_cast<double>(ee.size());
      s.mean_ee_mbit_per_joule = mean;
      s.mean_active_unicast_streams = active / static_cast<double>(ee.size());
      if (ee.size() > 1) {
        double ss = 0.0;
        for (double v : ee) ss += (v - mean) * (v - mean);
        s.std_ee_mbit_per_joule = std::sqrt(ss / static_cast<double>(ee.size() - 1));
      }
    }
    out.push_back(s);
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<Summary>& summaries) {
  os << kSummaryHeader << '\n';
  for (const auto& s : summaries) {
    os << s.experiment << ',' << bfee::to_string(s.mode) << ',' << s.m << ',' << s.n << ','
       << detail::number(s.rate_target_mbps) << ',' << s.realizations << ',' << s.solved << ','
       << detail::number(s.mean_ee_mbit_per_joule) << ','
       << detail::number(s.std_ee_mbit_per_joule) << ','
       << detail::number(s.mean_active_unicast_streams) << '\n';
  }
}

}  // namespace bfee::experiments
