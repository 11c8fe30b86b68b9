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

// Network description (cells, users, multicast groups, power model, radio
// parameters) and seeded Rayleigh channel generation.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bfee/error.hpp"

namespace bfee {

using Complex = std::complex<double>;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double v) { return 10.0 * std::log10(v); }

/// Who is served by whom. Users and groups are numbered globally.
struct Topology {
  std::vector<std::size_t> bs_antennas;                 // N_b
  std::vector<std::size_t> rx_antennas;                 // M_k
  std::vector<std::size_t> group_bs;                    // serving BS of group g
  std::vector<std::vector<std::size_t>> group_members;  // K_g

  // Derived by finalize().
  std::vector<std::size_t> user_group;
  std::vector<std::size_t> user_bs;
  std::vector<std::vector<std::size_t>> bs_users;
  std::vector<std::vector<std::size_t>> bs_groups;

  std::size_t num_bs() const { return bs_antennas.size(); }
  std::size_t num_users() const { return rx_antennas.size(); }
  std::size_t num_groups() const { return group_bs.size(); }

  /// |L_k| = M_k - 1 private streams next to the common stream.
  std::size_t private_streams(std::size_t k) const { return rx_antennas[k] - 1; }

  std::size_t total_private_streams() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < num_users(); ++k) n += private_streams(k);
    return n;
  }

  /// Fills the derived maps and checks every structural invariant.
  void finalize() {
    const std::size_t users = num_users();
    if (group_members.size() != group_bs.size()) {
      throw ConfigError("topology: group_members and group_bs sizes differ");
    }
    for (auto m : rx_antennas) {
      if (m < 1) throw ConfigError("topology: every user needs at least one antenna");
    }
    for (auto n : bs_antennas) {
      if (n < 1) throw ConfigError("topology: every BS needs at least one antenna");
    }
    constexpr auto kUnset = static_cast<std::size_t>(-1);
    user_group.assign(users, kUnset);
    user_bs.assign(users, kUnset);
    bs_users.assign(num_bs(), {});
    bs_groups.assign(num_bs(), {});
    for (std::size_t g = 0; g < num_groups(); ++g) {
      if (group_bs[g] >= num_bs()) throw ConfigError("topology: group served by unknown BS");
      if (group_members[g].empty()) throw ConfigError("topology: empty multicast group");
      bs_groups[group_bs[g]].push_back(g);
      for (auto k : group_members[g]) {
        if (k >= users) throw ConfigError("topology: group member out of range");
        if (user_group[k] != kUnset) throw ConfigError("topology: user in more than one group");
        user_group[k] = g;
        user_bs[k] = group_bs[g];
      }
    }
    for (std::size_t k = 0; k < users; ++k) {
      if (user_group[k] == kUnset) {
        throw ConfigError("topology: user " + std::to_string(k) + " belongs to no group");
      }
      bs_users[user_bs[k]].push_back(k);
    }
    for (std::size_t b = 0; b < num_bs(); ++b) {
      if (bs_antennas[b] < bs_groups[b].size()) {
        throw InfeasibleError("topology: BS " + std::to_string(b) + " has " +
                              std::to_string(bs_antennas[b]) + " antennas but serves " +
                              std::to_string(bs_groups[b].size()) + " groups");
      }
    }
  }
};

struct PowerModel {
  double eta = 0.35;                  // amplifier efficiency, (0, 1]
  std::vector<double> bs_max_power_w;  // P_b
  double p0_bs_w = 1.0;
  double p0_ue_w = 0.2;
  double prf_bs_w = 0.4;
  double prf_ue_w = 0.2;

  void validate(std::size_t num_bs) const {
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("power model: eta must lie in (0, 1]");
    if (bs_max_power_w.size() != num_bs) throw ConfigError("power model: one P_max per BS");
    for (double p : bs_max_power_w) {
      if (!(p >= 0.0)) throw ConfigError("power model: negative P_max");
    }
    if (p0_bs_w < 0.0 || p0_ue_w < 0.0 || prf_bs_w < 0.0 || prf_ue_w < 0.0) {
      throw ConfigError("power model: negative circuit power");
    }
  }
};

struct RadioConfig {
  double bandwidth_hz = 20e6;
  double noise_w = db_to_linear(-125.0);  // per receive antenna over the band
  double cell_separation_db = 3.0;
  double distance_m = 250.0;

  void validate() const {
    if (!(bandwidth_hz > 0.0)) throw ConfigError("radio: bandwidth must be positive");
    if (!(noise_w > 0.0)) throw ConfigError("radio: noise power must be positive");
    if (!(distance_m > 0.0)) throw ConfigError("radio: distance must be positive");
  }
};

struct RateTargets {
  std::vector<double> common_bps;  // one per group

  void validate(std::size_t num_groups) const {
    if (common_bps.size() != num_groups) throw ConfigError("rate targets: one per group");
    for (double r : common_bps) {
      if (!(r >= 0.0)) throw ConfigError("rate targets: negative target");
    }
  }
};

struct Scenario {
  Topology topology;
  PowerModel power;
  RadioConfig radio;
  RateTargets targets;
  std::uint64_t seed = 1;

  void validate() const {
    power.validate(topology.num_bs());
    radio.validate();
    targets.validate(topology.num_groups());
  }

  /// Same network with every group target set to `bps`.
  Scenario with_rate_target(double bps) const {
    Scenario s = *this;
    s.targets.common_bps.assign(topology.num_groups(), bps);
    return s;
  }
};

/// H_{b,k}: M_k x N_b for every (BS, user) pair.
struct ChannelSet {
  std::vector<std::vector<Eigen::MatrixXcd>> h;  // [b][k]

  const Eigen::MatrixXcd& operator()(std::size_t b, std::size_t k) const { return h[b][k]; }

  bool operator==(const ChannelSet& other) const {
    if (h.size() != other.h.size()) return false;
    for (std::size_t b = 0; b < h.size(); ++b) {
      if (h[b].size() != other.h[b].size()) return false;
      for (std::size_t k = 0; k < h[b].size(); ++k) {
        if (h[b][k].rows() != other.h[b][k].rows() || h[b][k].cols() != other.h[b][k].cols() ||
            h[b][k] != other.h[b][k]) {
          return false;
        }
      }
    }
    return true;
  }

  void validate(const Topology& topo) const {
    if (h.size() != topo.num_bs()) throw ShapeError("channels: wrong number of BSs");
    for (std::size_t b = 0; b < topo.num_bs(); ++b) {
      if (h[b].size() != topo.num_users()) throw ShapeError("channels: wrong number of users");
      for (std::size_t k = 0; k < topo.num_users(); ++k) {
        const auto& m = h[b][k];
        if (static_cast<std::size_t>(m.rows()) != topo.rx_antennas[k] ||
            static_cast<std::size_t>(m.cols()) != topo.bs_antennas[b]) {
          throw ShapeError("channels: H_{b,k} has the wrong shape");
        }
        if (!m.allFinite()) throw ShapeError("channels: non-finite entry");
      }
    }
  }
};

/// B cells with N antennas each; K users split evenly over the cells and, per
/// cell, into L/B equal-size groups. With `assignment_seed` the users of a
/// cell are shuffled before being cut into groups.
inline Topology build_symmetric_topology(std::size_t num_bs, std::size_t bs_antennas,
                                         std::size_t num_users, std::size_t num_groups,
                                         std::size_t rx_antennas,
                                         std::optional<std::uint64_t> assignment_seed = {}) {
  if (num_bs == 0 || num_users == 0 || num_groups == 0) {
    throw ConfigError("topology: B, K and L must be positive");
  }
  if (rx_antennas == 0) throw ConfigError("topology: M must be positive");
  if (num_users % num_bs != 0) throw ConfigError("topology: K must be divisible by B");
  if (num_groups % num_bs != 0) throw ConfigError("topology: L must be divisible by B");
  const std::size_t users_per_bs = num_users / num_bs;
  const std::size_t groups_per_bs = num_groups / num_bs;
  if (users_per_bs % groups_per_bs != 0) {
    throw ConfigError("topology: K/B must be divisible by L/B");
  }
  if (bs_antennas < groups_per_bs) {
    throw InfeasibleError("topology: N=" + std::to_string(bs_antennas) + " is smaller than the " +
                          std::to_string(groups_per_bs) + " groups served per BS");
  }
  const std::size_t group_size = users_per_bs / groups_per_bs;

  Topology topo;
  topo.bs_antennas.assign(num_bs, bs_antennas);
  topo.rx_antennas.assign(num_users, rx_antennas);
  std::mt19937_64 rng(assignment_seed.value_or(0));
  for (std::size_t b = 0; b < num_bs; ++b) {
    std::vector<std::size_t> cell(users_per_bs);
    std::iota(cell.begin(), cell.end(), b * users_per_bs);
    if (assignment_seed) std::shuffle(cell.begin(), cell.end(), rng);
    for (std::size_t j = 0; j < groups_per_bs; ++j) {
      topo.group_bs.push_back(b);
      std::vector<std::size_t> members(cell.begin() + static_cast<std::ptrdiff_t>(j * group_size),
                                       cell.begin() + static_cast<std::ptrdiff_t>((j + 1) * group_size));
      std::sort(members.begin(), members.end());
      topo.group_members.push_back(std::move(members));
    }
  }
  topo.finalize();
  return topo;
}

/// 35 + 30 log10(d) dB, plus the cell separation for links to other cells.
inline double pathloss_db(const Topology& topo, const RadioConfig& radio, std::size_t bs,
                          std::size_t user) {
  const double base = 35.0 + 30.0 * std::log10(radio.distance_m);
  return topo.user_bs.at(user) == bs ? base : base + radio.cell_separation_db;
}

/// i.i.d. CN(0, 10^(-pathloss/10)) entries; a pure function of the inputs.
inline ChannelSet generate_channels(const Topology& topo, const RadioConfig& radio,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ChannelSet cs;
  cs.h.resize(topo.num_bs());
  for (std::size_t b = 0; b < topo.num_bs(); ++b) {
    cs.h[b].resize(topo.num_users());
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      const double stddev = std::sqrt(db_to_linear(-pathloss_db(topo, radio, b, k)) / 2.0);
      Eigen::MatrixXcd m(static_cast<Eigen::Index>(topo.rx_antennas[k]),
                         static_cast<Eigen::Index>(topo.bs_antennas[b]));
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          const double re = gauss(rng);
          const double im = gauss(rng);
          m(i, j) = Complex(stddev * re, stddev * im);
        }
      }
      cs.h[b][k] = std::move(m);
    }
  }
  return cs;
}

// ---------------------------------------------------------------------------
// JSON boundary. Powers in dBW / W, rates in Mbit/s, as in the scenario files.

/// Symmetric two-cell scenario parameters; the JSON keys map 1:1 onto these fields.
struct ScenarioParams {
  std::size_t B = 2, N = 4, K = 8, L = 4, M = 2;
  double eta = 0.35;
  double p_max_dbw = 3.0;
  double p0_bs_w = 1.0, p0_ue_w = 0.2, prf_bs_w = 0.4, prf_ue_w = 0.2;
  double w_hz = 20e6;
  double n0_dbw = -125.0;
  double mu_db = 3.0;
  double distance_m = 250.0;
  double rate_target_mbps = 72.14;
  std::uint64_t seed = 1;
  std::optional<std::vector<std::vector<std::size_t>>> groups;  // realized assignment
};

inline Scenario make_scenario(const ScenarioParams& p) {
  Scenario s;
  if (p.groups) {
    const std::size_t groups_per_bs = p.L / std::max<std::size_t>(p.B, 1);
    if (p.groups->size() != p.L || p.L % p.B != 0) {
      throw ConfigError("scenario: 'groups' must list L groups, L divisible by B");
    }
    s.topology.bs_antennas.assign(p.B, p.N);
    s.topology.rx_antennas.assign(p.K, p.M);
    s.topology.group_members = *p.groups;
    for (std::size_t g = 0; g < p.L; ++g) s.topology.group_bs.push_back(g / groups_per_bs);
    s.topology.finalize();
  } else {
    s.topology = build_symmetric_topology(p.B, p.N, p.K, p.L, p.M, p.seed);
  }
  s.power.eta = p.eta;
  s.power.bs_max_power_w.assign(p.B, db_to_linear(p.p_max_dbw));
  s.power.p0_bs_w = p.p0_bs_w;
  s.power.p0_ue_w = p.p0_ue_w;
  s.power.prf_bs_w = p.prf_bs_w;
  s.power.prf_ue_w = p.prf_ue_w;
  s.radio.bandwidth_hz = p.w_hz;
  s.radio.noise_w = db_to_linear(p.n0_dbw);
  s.radio.cell_separation_db = p.mu_db;
  s.radio.distance_m = p.distance_m;
  s.targets.common_bps.assign(s.topology.num_groups(), p.rate_target_mbps * 1e6);
  s.seed = p.seed;
  s.validate();
  return s;
}

inline ScenarioParams params_from_json(const nlohmann::json& j) {
  ScenarioParams p;
  static const char* const kKnown[] = {"B",        "N",        "K",        "L",        "M",
                                       "eta",      "P_max_dbw", "P0_bs_w", "P0_ue_w",  "Prf_bs_w",
                                       "Prf_ue_w", "W_hz",     "N0_dbw",   "mu_db",    "distance_m",
                                       "rate_target_mbps",     "seed",     "groups"};
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  for (const auto& item : j.items()) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown),
                     [&](const char* k) { return item.key() == k; }) == std::end(kKnown)) {
      throw ConfigError("scenario: unknown key '" + item.key() + "'");
    }
  }
  try {
    p.B = j.value("B", p.B);
    p.N = j.value("N", p.N);
    p.K = j.value("K", p.K);
    p.L = j.value("L", p.L);
    p.M = j.value("M", p.M);
    p.eta = j.value("eta", p.eta);
    p.p_max_dbw = j.value("P_max_dbw", p.p_max_dbw);
    p.p0_bs_w = j.value("P0_bs_w", p.p0_bs_w);
    p.p0_ue_w = j.value("P0_ue_w", p.p0_ue_w);
    p.prf_bs_w = j.value("Prf_bs_w", p.prf_bs_w);
    p.prf_ue_w = j.value("Prf_ue_w", p.prf_ue_w);
    p.w_hz = j.value("W_hz", p.w_hz);
    p.n0_dbw = j.value("N0_dbw", p.n0_dbw);
    p.mu_db = j.value("mu_db", p.mu_db);
    p.distance_m = j.value("distance_m", p.distance_m);
    p.rate_target_mbps = j.value("rate_target_mbps", p.rate_target_mbps);
    p.seed = j.value("seed", p.seed);
    if (j.contains("groups")) {
      p.groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  return p;
}

inline nlohmann::json params_to_json(const ScenarioParams& p) {
  nlohmann::json j = {{"B", p.B},
                      {"N", p.N},
                      {"K", p.K},
                      {"L", p.L},
                      {"M", p.M},
                      {"eta", p.eta},
                      {"P_max_dbw", p.p_max_dbw},
                      {"P0_bs_w", p.p0_bs_w},
                      {"P0_ue_w", p.p0_ue_w},
                      {"Prf_bs_w", p.prf_bs_w},
                      {"Prf_ue_w", p.prf_ue_w},
                      {"W_hz", p.w_hz},
                      {"N0_dbw", p.n0_dbw},
                      {"mu_db", p.mu_db},
                      {"distance_m", p.distance_m},
                      {"rate_target_mbps", p.rate_target_mbps},
                      {"seed", p.seed}};
  if (p.groups) j["groups"] = *p.groups;
  return j;
}

/// Parameters with the realized group assignment of `s` recorded, so the file
/// replays the same network without re-drawing the assignment.
inline ScenarioParams with_realized_groups(ScenarioParams p, const Scenario& s) {
  p.groups = s.topology.group_members;
  return p;
}

inline ScenarioParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario: '" + path + "' is not valid JSON: " + e.what());
  }
  return params_from_json(j);
}

/// Complex matrices as nested [re, im] pairs, row-major.
inline nlohmann::json to_json(const Eigen::MatrixXcd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXcd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("matrix: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& z = row.at(static_cast<std::size_t>(c));
      m(i, c) = Complex(z.at(0).get<double>(), z.at(1).get<double>());
    }
  }
  return m;
}

inline nlohmann::json to_json(const ChannelSet& cs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& per_bs : cs.h) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& m : per_bs) row.push_back(to_json(m));
    out.push_back(std::move(row));
  }
  return out;
}

inline ChannelSet channels_from_json(const nlohmann::json& j) {
  ChannelSet cs;
  for (const auto& per_bs : j) {
    cs.h.emplace_back();
    for (const auto& m : per_bs) cs.h.back().push_back(matrix_from_json(m));
  }
  return cs;
}

}  // namespace bfee
