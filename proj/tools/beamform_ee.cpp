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

// beamform-ee: command-line driver for the Monte Carlo experiments.
//
// Exit codes: 0 success (infeasible grid points are flagged in the CSV),
// 2 configuration error, 3 at least one realization failed in the solver.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bfee/error.hpp"
#include "bfee/experiments.hpp"
#include "bfee/scenario.hpp"

namespace {

namespace ex = bfee::experiments;

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct CommonArgs {
  std::string scenario_path;
  std::size_t seeds = 20;
  std::uint64_t seed_base = 1;
  std::vector<double> grid;
  std::string mode;
  double tol = 1e-5;
  int max_iters = 200;
  std::string out_path;
  std::string summary_path;
  std::string save_scenario_path;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
};

void add_common_options(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scenario", a.scenario_path, "Scenario JSON file (defaults when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seeds", a.seeds, "Number of channel realizations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed-base", a.seed_base, "Channel seed of the first realization")
      ->capture_default_str();
  cmd->add_option("--grid", a.grid,
                  "Rate targets in Mbit/s, or receive antenna counts for sweep-antennas")
      ->delimiter(',');
  cmd->add_option("--mode", a.mode, "joint, multicast-only or both")
      ->check(CLI::IsMember({"joint", "multicast-only", "both"}));
  cmd->add_option("--tol", a.tol, "Relative EE change that stops the iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", a.max_iters, "Iteration cap per run")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", a.out_path, "Per-realization CSV (stdout when omitted)");
  cmd->add_option("--summary", a.summary_path, "Monte Carlo summary CSV");
  cmd->add_option("--save-scenario", a.save_scenario_path,
                  "Write the scenario with its realized group assignment");
  cmd->add_option("--workers", a.workers, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

ex::ExperimentSpec build_spec(ex::Kind kind, const CommonArgs& a) {
  ex::ExperimentSpec spec;
  spec.kind = kind;
  if (!a.scenario_path.empty()) spec.scenario = bfee::load_params(a.scenario_path);
  spec.grid = a.grid;
  spec.realizations = a.seeds;
  spec.seed_base = a.seed_base;
  const bool sweep = kind == ex::Kind::kSweepRate || kind == ex::Kind::kSweepAntennas;
  const std::string mode = a.mode.empty() ? (sweep ? "both" : "joint") : a.mode;
  if (mode == "both") {
    spec.modes = {bfee::Mode::kJoint, bfee::Mode::kMulticastOnly};
  } else {
    spec.modes = {ex::mode_from_string(mode)};
  }
  spec.options.rel_objective_tol = a.tol;
  spec.options.max_iters = a.max_iters;
  spec.workers = a.workers;
  spec.validate();
  return spec;
}

void write_file(const std::string& path, const auto& writer) {
  std::ofstream os(path);
  if (!os) throw bfee::ConfigError("cannot open '" + path + "' for writing");
  writer(os);
  if (!os) throw bfee::ConfigError("failed writing '" + path + "'");
}

int execute(ex::Kind kind, const CommonArgs& a) {
  const auto spec = build_spec(kind, a);
  if (!a.save_scenario_path.empty()) {
    const auto sc = bfee::make_scenario(spec.scenario);
    write_file(a.save_scenario_path, [&](std::ostream& os) {
      os << bfee::params_to_json(bfee::with_realized_groups(spec.scenario, sc)).dump(2) << '\n';
    });
  }
  const auto result = ex::run_experiment(spec);
  if (a.out_path.empty()) {
    ex::write_csv(std::cout, result.rows);
  } else {
    write_file(a.out_path, [&](std::ostream& os) { ex::write_csv(os, result.rows); });
  }
  if (!a.summary_path.empty()) {
    write_file(a.summary_path,
               [&](std::ostream& os) { ex::write_summary_csv(os, ex::summarize(result.rows)); });
  }
  bool solver_failure = false;
  for (const auto& d : result.diagnostics) {
    std::cerr << "seed " << d.seed << " " << bfee::to_string(d.mode) << " grid " << d.grid_value
              << ": " << d.message << '\n';
  }
  for (const auto& r : result.rows) {
    if (r.status == "solver-failure") solver_failure = true;
  }
  return solver_failure ? kExitSolver : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-efficient multicell unicast/multicast beamforming experiments"};
  app.require_subcommand(1);
  std::optional<ex::Kind> chosen;
  CommonArgs args;
  const std::vector<std::pair<ex::Kind, std::string>> commands = {
      {ex::Kind::kConvergence, "Per-iteration EE traces"},
      {ex::Kind::kSweepRate, "Final EE over a grid of common-rate targets"},
      {ex::Kind::kSweepAntennas, "Final EE and active unicast streams over receive antenna counts"},
      {ex::Kind::kSingle, "One optimization per realization"},
  };
  for (const auto& [kind, help] : commands) {
    auto* cmd = app.add_subcommand(ex::to_string(kind), help);
    add_common_options(cmd, args);
    cmd->callback([&chosen, kind = kind] { chosen = kind; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  try {
    return execute(*chosen, args);
  } catch (const bfee::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const bfee::InfeasibleError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const bfee::ShapeError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
}
