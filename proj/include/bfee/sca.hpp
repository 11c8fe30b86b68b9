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

// Energy-efficient joint unicast/multicast transmit beamforming by successive
// convex approximation.
//
// With the receive filters fixed, every MSE constraint eps <= 1/nu is replaced
// by the tangent of 1/nu at the current operating point, which makes the
// feasible set an inner approximation of the original one. The remaining
// concave-over-convex ratio
//
//     (sum_{k,l} log nu_{k,l} + sum_g r_g) / ((1/eta) sum ||w||^2 + P_cir)
//
// is turned into a conic program by the Charnes-Cooper scaling
// (w, nu, r) = (w_bar, nu_bar, r_bar) / phi with the denominator pinned to 1.
// After each solve the receivers are reset to MMSE and the tangent points are
// moved to the inverse MSE they achieve, so the true EE never decreases.
//
// Inside the conic program rates are in nats per Hz; EE values reported to
// callers are always in bit/J.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfee/conic/barrier_solver.hpp"
#include "bfee/conic/program.hpp"
#include "bfee/error.hpp"
#include "bfee/metrics.hpp"
#include "bfee/mmse.hpp"
#include "bfee/scenario.hpp"

namespace bfee {

enum class Mode { kJoint, kMulticastOnly };

inline const char* to_string(Mode m) { return m == Mode::kJoint ? "joint" : "multicast-only"; }

struct SolverOptions {
  int max_iters = 200;
  double rel_objective_tol = 1e-5;
  double conic_tolerance = 1e-8;
  double stream_active_threshold = 1e-6;  // fraction of P_b
  Mode mode = Mode::kJoint;
  double phi_min = 1e-8;
  int max_feasibility_iters = 60;
  double initial_common_power_fraction = 0.5;
  double initial_private_power_fraction = 0.25;

  void validate() const {
    if (max_iters < 0 || max_feasibility_iters < 0) throw ConfigError("options: negative cap");
    if (!(rel_objective_tol > 0.0) || !(conic_tolerance > 0.0) ||
        !(stream_active_threshold > 0.0) || !(phi_min > 0.0)) {
      throw ConfigError("options: tolerances must be positive");
    }
    if (initial_common_power_fraction + initial_private_power_fraction > 1.0 ||
        !(initial_common_power_fraction > 0.0) || initial_private_power_fraction < 0.0) {
      throw ConfigError("options: initial power fractions must be positive and sum to <= 1");
    }
  }
};

/// Tangent of 1/nu at `point`: 1/point - (nu - point)/point^2.
struct InverseTangent {
  double point;

  double operator()(double nu) const { return 1.0 / point - (nu - point) / (point * point); }
  double intercept() const { return 2.0 / point; }
  double slope() const { return -1.0 / (point * point); }
};

inline InverseTangent linearize_inverse(double nu_point) {
  if (!(nu_point > 0.0) || !std::isfinite(nu_point)) {
    throw std::invalid_argument("linearize_inverse: point must be positive and finite");
  }
  return {nu_point};
}

/// Operating points are kept away from 1 so a zero-rate stream still has a
/// non-degenerate tangent.
inline constexpr double kMinOperatingPoint = 1.0 + 1e-12;

struct IterationRecord {
  int iteration = 0;
  double ee_bits_per_joule = 0.0;  // recomputed through metrics
  double sum_rate_bps = 0.0;
  double total_power_w = 0.0;
  double scaled_objective = std::numeric_limits<double>::quiet_NaN();     // bit/J
  double recovered_objective = std::numeric_limits<double>::quiet_NaN();  // bit/J
  double phi = std::numeric_limits<double>::quiet_NaN();
  double max_bs_power_ratio = 0.0;     // max_b  sum ||w||^2 / P_b
  double min_common_rate_ratio = 0.0;  // min_g  R_g / target_g (inf when all targets are 0)
  double max_mse_excess = 0.0;         // max over streams of eps(w, u_used) - 1/nu
  std::string solver_status = "init";
  int newton_steps = 0;
};

enum class Termination { kConverged, kIterationLimit, kSolverFailure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::kConverged: return "converged";
    case Termination::kIterationLimit: return "iteration-limit";
    case Termination::kSolverFailure: return "solver-failure";
  }
  return "unknown";
}

struct IterateState {
  BeamformerSet beams;
  ReceiverSet receivers;
  std::vector<std::vector<double>> nu_private;  // tangent points, [k][l]
  std::vector<double> nu_common;                // [k]
  std::vector<double> common_rate_bps;          // [g]
  double phi = 1.0;
  int iteration = 0;
  int feasibility_iterations = 0;
  std::vector<IterationRecord> trace;
  Termination termination = Termination::kIterationLimit;
  std::string message;

  double ee() const { return trace.empty() ? 0.0 : trace.back().ee_bits_per_joule; }
};

// ---------------------------------------------------------------------------
// Subproblem assembly

enum class SubproblemKind {
  kEnergyEfficiency,  // Charnes-Cooper scaled EE maximization
  kFeasibility,       // phi = 1; worst target slack first, private log-rates second
};

/// Weight of the target slack against the private log-rates in the
/// feasibility objective.
inline constexpr double kFeasibilitySlackWeight = 1e3;

/// Cap on the rewarded target slack, in nats per Hz, relative to 1 + target.
inline constexpr double kFeasibilitySlackCap = 1e-2;

/// Indices of the real decision variables. Complex beams are interleaved
/// (re, im) pairs starting at the stored offset.
struct SubproblemLayout {
  SubproblemKind kind = SubproblemKind::kEnergyEfficiency;
  bool with_private = true;
  std::vector<std::vector<conic::VarIndex>> private_beam;  // [k][l]
  std::vector<conic::VarIndex> common_beam;                // [g]
  conic::VarIndex phi = 0;
  std::vector<std::vector<conic::VarIndex>> nu_private;  // [k][l]
  std::vector<conic::VarIndex> nu_common;                // [k]
  std::vector<conic::VarIndex> rate;                     // [g]
  std::vector<std::vector<conic::VarIndex>> t_private;   // [k][l]
  std::optional<conic::VarIndex> slack;
  double nats_to_bits_per_hz = 1.0 / std::numbers::ln2;
};

struct Subproblem {
  conic::ConicProgram program;
  SubproblemLayout layout;
};

namespace detail {

/// Real-embedded rows of the complex scalar  a * w_bar  where a is a 1 x N
/// row and w_bar starts at `offset`.
inline void add_complex_product(const Eigen::RowVectorXcd& a, conic::VarIndex offset,
                                conic::AffineExpr& re, conic::AffineExpr& im) {
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const auto vr = offset + 2 * static_cast<conic::VarIndex>(j);
    const auto vi = vr + 1;
    re.add(vr, a(j).real()).add(vi, -a(j).imag());
    im.add(vr, a(j).imag()).add(vi, a(j).real());
  }
}

inline std::vector<conic::AffineExpr> beam_rows(conic::VarIndex offset, std::size_t n,
                                                double scale = 1.0) {
  std::vector<conic::AffineExpr> rows;
  for (std::size_t j = 0; j < 2 * n; ++j) rows.push_back(conic::AffineExpr::var(offset + j, scale));
  return rows;
}

/// MSE epigraph rows for one receive filter u at user k: desired beam at
/// `desired_offset`, every other beam as interference, and the noise term.
inline std::vector<conic::AffineExpr> mse_rows(const Scenario& sc, const ChannelSet& h,
                                               const SubproblemLayout& lay, std::size_t k,
                                               const Eigen::VectorXcd& u,
                                               conic::VarIndex desired_offset) {
  const auto& topo = sc.topology;
  std::vector<conic::AffineExpr> rows;
  std::vector<Eigen::RowVectorXcd> uh(topo.num_bs());
  for (std::size_t b = 0; b < topo.num_bs(); ++b) uh[b] = u.adjoint() * h(b, k);

  conic::AffineExpr re = conic::AffineExpr::var(lay.phi);
  conic::AffineExpr im;
  conic::AffineExpr dre, dim;
  add_complex_product(uh[topo.user_bs[k]], desired_offset, dre, dim);
  re.add(dre, -1.0);
  im.add(dim, -1.0);
  rows.push_back(std::move(re));
  rows.push_back(std::move(im));
  if (u.squaredNorm() == 0.0) return rows;

  auto interferer = [&](conic::VarIndex offset, std::size_t bs) {
    if (offset == desired_offset) return;
    conic::AffineExpr ire, iim;
    add_complex_product(uh[bs], offset, ire, iim);
    rows.push_back(std::move(ire));
    rows.push_back(std::move(iim));
  };
  if (lay.with_private) {
    for (std::size_t i = 0; i < topo.num_users(); ++i) {
      for (auto off : lay.private_beam[i]) interferer(off, topo.user_bs[i]);
    }
  }
  for (std::size_t g = 0; g < topo.num_groups(); ++g) interferer(lay.common_beam[g], topo.group_bs[g]);
  rows.push_back(conic::AffineExpr::var(lay.phi, std::sqrt(sc.radio.noise_w) * u.norm()));
  return rows;
}

}  // namespace detail

/// Scaled conic subproblem around the operating points and receivers in
/// `state`. In kMulticastOnly mode private beams are not variables.
inline Subproblem build_subproblem(const IterateState& state, const Scenario& sc,
                                   const ChannelSet& h, Mode mode,
                                   SubproblemKind kind = SubproblemKind::kEnergyEfficiency,
                                   double phi_min = 1e-8) {
  using conic::AffineExpr;
  const auto& topo = sc.topology;
  state.beams.validate(topo);
  state.receivers.validate(topo);

  Subproblem sp;
  auto& prog = sp.program;
  auto& lay = sp.layout;
  lay.kind = kind;
  lay.with_private = mode == Mode::kJoint && topo.total_private_streams() > 0;
  const bool ee = kind == SubproblemKind::kEnergyEfficiency;
  const bool private_objective = lay.with_private;
  const double nats_per_bps = std::numbers::ln2 / sc.radio.bandwidth_hz;

  // Variables.
  lay.private_beam.resize(topo.num_users());
  if (lay.with_private) {
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      const auto n = topo.bs_antennas[topo.user_bs[k]];
      for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
        lay.private_beam[k].push_back(prog.add_variables(2 * n));
      }
    }
  }
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    lay.common_beam.push_back(prog.add_variables(2 * topo.bs_antennas[topo.group_bs[g]]));
  }
  lay.phi = prog.add_variable(ee ? phi_min : -conic::kInf, conic::kInf);
  lay.nu_private.resize(topo.num_users());
  lay.t_private.resize(topo.num_users());
  if (private_objective) {
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
        lay.nu_private[k].push_back(prog.add_variable());
      }
    }
  }
  for (std::size_t k = 0; k < topo.num_users(); ++k) lay.nu_common.push_back(prog.add_variable());
  for (std::size_t g = 0; g < topo.num_groups(); ++g) lay.rate.push_back(prog.add_variable());
  if (private_objective) {
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
        const auto t = prog.add_variable();
        lay.t_private[k].push_back(t);
        prog.set_objective(t, 1.0);
      }
    }
  }
  if (ee) {
    for (auto r : lay.rate) prog.set_objective(r, 1.0);
  } else {
    double top = 0.0;
    for (double r : sc.targets.common_bps) top = std::max(top, r * nats_per_bps);
    lay.slack = prog.add_variable(-conic::kInf, kFeasibilitySlackCap * (1.0 + top));
    prog.set_objective(*lay.slack, kFeasibilitySlackWeight);
    prog.add_linear(AffineExpr::var(lay.phi), conic::Relation::kEqual, 1.0);
  }

  const AffineExpr phi = AffineExpr::var(lay.phi);

  // Per-BS power: ||w_bar_b|| <= sqrt(P_b) phi.
  for (std::size_t b = 0; b < topo.num_bs(); ++b) {
    std::vector<AffineExpr> rows;
    const auto n = topo.bs_antennas[b];
    for (auto k : topo.bs_users[b]) {
      for (auto off : lay.private_beam[k]) {
        auto r = detail::beam_rows(off, n);
        rows.insert(rows.end(), r.begin(), r.end());
      }
    }
    for (auto g : topo.bs_groups[b]) {
      auto r = detail::beam_rows(lay.common_beam[g], n);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    prog.add_soc(std::move(rows), AffineExpr::var(lay.phi, std::sqrt(sc.power.bs_max_power_w[b])));
  }

  // Common-rate targets.
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    const double target = sc.targets.common_bps[g] * nats_per_bps;
    AffineExpr lhs = AffineExpr::var(lay.phi, target);
    lhs.add(lay.rate[g], -1.0);
    if (!ee) lhs.add(*lay.slack, 1.0);
    prog.add_linear(std::move(lhs), conic::Relation::kLessEqual, 0.0);
  }

  // MSE epigraphs:  ||v||^2 <= phi * (2 phi / nu_pt - nu_bar / nu_pt^2).
  auto tangent_rhs = [&](double nu_point, conic::VarIndex nu_var) {
    const auto tan = linearize_inverse(std::max(nu_point, kMinOperatingPoint));
    AffineExpr y = AffineExpr::var(lay.phi, tan.intercept());
    y.add(nu_var, tan.slope());
    return y;
  };
  if (private_objective) {
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
        auto rows = detail::mse_rows(sc, h, lay, k, state.receivers.private_rx[k][l],
                                     lay.private_beam[k][l]);
        prog.add_rotated_soc(std::move(rows), phi,
                             tangent_rhs(state.nu_private[k][l], lay.nu_private[k][l]));
      }
    }
  }
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    auto rows = detail::mse_rows(sc, h, lay, k, state.receivers.common_rx[k],
                                 lay.common_beam[topo.user_group[k]]);
    prog.add_rotated_soc(std::move(rows), phi, tangent_rhs(state.nu_common[k], lay.nu_common[k]));
  }

  // Perspective-of-log epigraphs.
  if (private_objective) {
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
        prog.add_exp(AffineExpr::var(lay.t_private[k][l]), phi,
                     AffineExpr::var(lay.nu_private[k][l]));
      }
    }
  }
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    for (auto k : topo.group_members[g]) {
      prog.add_exp(AffineExpr::var(lay.rate[g]), phi, AffineExpr::var(lay.nu_common[k]));
    }
  }

  // Denominator: (1/eta) sum ||w_bar||^2 + phi^2 P_cir <= phi.
  if (ee) {
    std::vector<AffineExpr> rows;
    const double inv_sqrt_eta = 1.0 / std::sqrt(sc.power.eta);
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      for (auto off : lay.private_beam[k]) {
        auto r = detail::beam_rows(off, topo.bs_antennas[topo.user_bs[k]], inv_sqrt_eta);
        rows.insert(rows.end(), r.begin(), r.end());
      }
    }
    for (std::size_t g = 0; g < topo.num_groups(); ++g) {
      auto r = detail::beam_rows(lay.common_beam[g], topo.bs_antennas[topo.group_bs[g]],
                                 inv_sqrt_eta);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    rows.push_back(AffineExpr::var(lay.phi, std::sqrt(circuit_power(topo, sc.power))));
    prog.add_rotated_soc(std::move(rows), phi, AffineExpr(1.0));
  }
  return sp;
}

// ---------------------------------------------------------------------------
// Recovery

struct RecoveredPoint {
  BeamformerSet beams;
  std::vector<std::vector<double>> nu_private;  // nu_bar / phi, empty streams when not modeled
  std::vector<double> nu_common;
  std::vector<double> rate_nats;  // r_bar / phi, nats per Hz
  double phi = 1.0;
  bool degenerate = false;  // phi at its lower bound
};

inline Eigen::VectorXcd read_beam(std::span<const double> x, conic::VarIndex offset, std::size_t n,
                                  double inv_phi) {
  Eigen::VectorXcd w(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    w(static_cast<Eigen::Index>(j)) =
        Complex(x[offset + 2 * j] * inv_phi, x[offset + 2 * j + 1] * inv_phi);
  }
  return w;
}

/// Divides every scaled variable by phi.
inline RecoveredPoint recover(const conic::ConicSolution& sol, const SubproblemLayout& lay,
                              const Topology& topo, double phi_min = 1e-8) {
  if (!sol.optimal()) throw SolverError("recover: solution is not optimal");
  const std::span<const double> x = sol.x;
  RecoveredPoint out;
  out.phi = x[lay.phi];
  if (!(out.phi > 0.0)) throw SolverError("recover: non-positive phi");
  out.degenerate = out.phi <= phi_min * (1.0 + 1e-6);
  const double inv = 1.0 / out.phi;
  out.beams = BeamformerSet::zeros(topo);
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    for (std::size_t l = 0; l < lay.private_beam[k].size(); ++l) {
      out.beams.private_beams[k][l] =
          read_beam(x, lay.private_beam[k][l], topo.bs_antennas[topo.user_bs[k]], inv);
    }
  }
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    out.beams.common_beams[g] =
        read_beam(x, lay.common_beam[g], topo.bs_antennas[topo.group_bs[g]], inv);
  }
  out.nu_private.resize(topo.num_users());
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    for (auto v : lay.nu_private[k]) out.nu_private[k].push_back(x[v] * inv);
  }
  for (auto v : lay.nu_common) out.nu_common.push_back(x[v] * inv);
  for (auto v : lay.rate) out.rate_nats.push_back(x[v] * inv);
  return out;
}

/// Unscaled fractional objective (nats/J per Hz) of a recovered point.
inline double fractional_objective(const RecoveredPoint& p, const Scenario& sc) {
  double num = 0.0;
  for (const auto& per_user : p.nu_private) {
    for (double nu : per_user) num += std::log(nu);
  }
  for (double r : p.rate_nats) num += r;
  return num / total_power(p.beams, sc.topology, sc.power);
}

/// Strictly feasible point of an EE subproblem built from `state`: the
/// current beams scaled into the interior of the denominator constraint.
/// Empty when some common-rate target is not met with positive slack.
inline std::vector<double> interior_point(const IterateState& state, const Subproblem& sp,
                                          const Scenario& sc) {
  const auto& lay = sp.layout;
  const auto& topo = sc.topology;
  if (lay.kind != SubproblemKind::kEnergyEfficiency) return {};
  std::vector<double> x(sp.program.num_variables(), 0.0);
  const double phi = 0.9 / total_power(state.beams, topo, sc.power);
  x[lay.phi] = phi;
  auto put_beam = [&](conic::VarIndex offset, const Eigen::VectorXcd& w) {
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      x[offset + 2 * static_cast<std::size_t>(j)] = phi * w(j).real();
      x[offset + 2 * static_cast<std::size_t>(j) + 1] = phi * w(j).imag();
    }
  };
  constexpr double kShrink = 0.9;  // nu_bar = kShrink * phi * nu_pt
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    for (std::size_t l = 0; l < lay.private_beam[k].size(); ++l) {
      put_beam(lay.private_beam[k][l], state.beams.private_beams[k][l]);
    }
    for (std::size_t l = 0; l < lay.nu_private[k].size(); ++l) {
      const double nu = std::max(state.nu_private[k][l], kMinOperatingPoint);
      x[lay.nu_private[k][l]] = kShrink * phi * nu;
      x[lay.t_private[k][l]] = phi * (std::log(kShrink * nu) - 0.1);
    }
  }
  const double nats_per_bps = std::numbers::ln2 / sc.radio.bandwidth_hz;
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    put_beam(lay.common_beam[g], state.beams.common_beams[g]);
    const double target = sc.targets.common_bps[g] * nats_per_bps;
    double slack = std::numeric_limits<double>::infinity();
    for (auto k : topo.group_members[g]) {
      slack = std::min(slack, std::log(std::max(state.nu_common[k], kMinOperatingPoint)) - target);
    }
    if (!(slack > 0.0)) return {};
    const double back_off = std::min(slack / 3.0, -std::log(kShrink));
    for (auto k : topo.group_members[g]) {
      x[lay.nu_common[k]] = phi * std::max(state.nu_common[k], kMinOperatingPoint) *
                            std::exp(-back_off);
    }
    x[lay.rate[g]] = phi * (target + slack / 3.0);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Algorithm state helpers

namespace detail {

inline void refresh_receivers(IterateState& s, const Scenario& sc, const ChannelSet& h) {
  const auto& topo = sc.topology;
  const double n0 = sc.radio.noise_w;
  s.receivers = mmse_receivers(topo, h, s.beams, n0);
  s.nu_private.assign(topo.num_users(), {});
  s.nu_common.assign(topo.num_users(), 0.0);
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
      s.nu_private[k].push_back(
          std::max(1.0 / mse_private(topo, h, s.beams, s.receivers, n0, k, l), kMinOperatingPoint));
    }
    s.nu_common[k] =
        std::max(1.0 / mse_common(topo, h, s.beams, s.receivers, n0, k), kMinOperatingPoint);
  }
}

inline IterationRecord evaluate(const IterateState& s, const Scenario& sc, const ChannelSet& h,
                                int iteration) {
  const auto rep = rates(sc, h, s.beams, s.receivers);
  IterationRecord rec;
  rec.iteration = iteration;
  rec.ee_bits_per_joule = rep.ee_bits_per_joule;
  rec.sum_rate_bps = rep.sum_rate_bps;
  rec.total_power_w = rep.total_power_w;
  const auto& topo = sc.topology;
  for (std::size_t b = 0; b < topo.num_bs(); ++b) {
    const double cap = sc.power.bs_max_power_w[b];
    const double used = s.beams.bs_power(topo, b);
    rec.max_bs_power_ratio =
        std::max(rec.max_bs_power_ratio, cap > 0.0 ? used / cap : (used > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
  }
  rec.min_common_rate_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    if (sc.targets.common_bps[g] > 0.0) {
      rec.min_common_rate_ratio =
          std::min(rec.min_common_rate_ratio, rep.group_rate_bps[g] / sc.targets.common_bps[g]);
    }
  }
  return rec;
}

inline std::vector<double> group_rates(const IterateState& s, const Scenario& sc) {
  std::vector<double> r;
  for (std::size_t g = 0; g < sc.topology.num_groups(); ++g) {
    double worst = std::numeric_limits<double>::infinity();
    for (auto k : sc.topology.group_members[g]) worst = std::min(worst, s.nu_common[k]);
    r.push_back(sc.radio.bandwidth_hz * std::log2(worst));
  }
  return r;
}

inline bool targets_met(const std::vector<double>& rates_bps, const Scenario& sc, double margin) {
  for (std::size_t g = 0; g < rates_bps.size(); ++g) {
    if (rates_bps[g] < sc.targets.common_bps[g] * (1.0 + margin)) return false;
  }
  return true;
}

/// Scales all beams by the common factor from a geometric grid that gives the
/// highest EE while every common-rate target still holds with `margin`.
inline void back_off_power(IterateState& s, const Scenario& sc, const ChannelSet& h,
                           double margin) {
  constexpr int kSteps = 40;
  constexpr double kRatio = 0.85;  // power ratio between grid points
  double best_ee = rates(sc, h, s.beams, s.receivers).ee_bits_per_joule;
  double best_scale = 1.0;
  IterateState trial;
  for (int i = 1; i <= kSteps; ++i) {
    const double scale = std::pow(kRatio, 0.5 * i);
    trial.beams = s.beams;
    for (auto& per_user : trial.beams.private_beams) {
      for (auto& w : per_user) w *= scale;
    }
    for (auto& w : trial.beams.common_beams) w *= scale;
    refresh_receivers(trial, sc, h);
    if (!targets_met(group_rates(trial, sc), sc, margin)) break;
    const double ee = rates(sc, h, trial.beams, trial.receivers).ee_bits_per_joule;
    if (ee > best_ee) {
      best_ee = ee;
      best_scale = scale;
    }
  }
  if (best_scale == 1.0) return;
  for (auto& per_user : s.beams.private_beams) {
    for (auto& w : per_user) w *= best_scale;
  }
  for (auto& w : s.beams.common_beams) w *= best_scale;
  refresh_receivers(s, sc, h);
}

/// Upper bound on each user's common rate: full BS power, no interference,
/// best receive direction.
inline void check_rate_capacity(const Scenario& sc, const ChannelSet& h) {
  const auto& topo = sc.topology;
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    const auto b = topo.group_bs[g];
    for (auto k : topo.group_members[g]) {
      const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h(b, k));
      const double smax = svd.singularValues()(0);
      const double snr = sc.power.bs_max_power_w[b] * smax * smax / sc.radio.noise_w;
      const double cap = sc.radio.bandwidth_hz * std::log2(1.0 + snr);
      if (cap < sc.targets.common_bps[g]) {
        throw InfeasibleError("common-rate target of group " + std::to_string(g) +
                              " exceeds the interference-free capacity of user " +
                              std::to_string(k) + " (" + std::to_string(cap / 1e6) + " Mbit/s)");
      }
    }
  }
}

}  // namespace detail

/// Starting beams: each common beam along the dominant right singular vector
/// of its stacked group channel; private streams of user k along the next
/// right singular vectors of H_{b_k,k}. Power fractions are shares of P_b.
inline BeamformerSet default_initial_beams(const Scenario& sc, const ChannelSet& h,
                                           const SolverOptions& opt) {
  const auto& topo = sc.topology;
  BeamformerSet w = BeamformerSet::zeros(topo);
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    const auto b = topo.group_bs[g];
    const auto n = static_cast<Eigen::Index>(topo.bs_antennas[b]);
    Eigen::Index rows = 0;
    for (auto k : topo.group_members[g]) rows += h(b, k).rows();
    Eigen::MatrixXcd stacked(rows, n);
    Eigen::Index r = 0;
    for (auto k : topo.group_members[g]) {
      stacked.middleRows(r, h(b, k).rows()) = h(b, k);
      r += h(b, k).rows();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked, Eigen::ComputeFullV);
    const double power = opt.initial_common_power_fraction * sc.power.bs_max_power_w[b] /
                         static_cast<double>(topo.bs_groups[b].size());
    w.common_beams[g] = std::sqrt(power) * svd.matrixV().col(0);
  }
  if (opt.mode == Mode::kJoint && opt.initial_private_power_fraction > 0.0) {
    for (std::size_t b = 0; b < topo.num_bs(); ++b) {
      std::size_t streams = 0;
      for (auto k : topo.bs_users[b]) streams += topo.private_streams(k);
      if (streams == 0) continue;
      const double power = opt.initial_private_power_fraction * sc.power.bs_max_power_w[b] /
                           static_cast<double>(streams);
      for (auto k : topo.bs_users[b]) {
        const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h(b, k), Eigen::ComputeFullV);
        const auto n = svd.matrixV().cols();
        for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
          const auto col = static_cast<Eigen::Index>(l + 1) % n;
          w.private_beams[k][l] = std::sqrt(power) * svd.matrixV().col(col);
        }
      }
    }
  }
  return w;
}

/// State for given beams: MMSE receivers, operating points nu = 1/eps, and a
/// feasibility phase when some common-rate target is missed.
inline IterateState prepare_state(BeamformerSet beams, const Scenario& sc, const ChannelSet& h,
                                  const SolverOptions& opt) {
  sc.validate();
  opt.validate();
  h.validate(sc.topology);
  beams.validate(sc.topology);
  detail::check_rate_capacity(sc, h);
  if (opt.mode == Mode::kMulticastOnly) {
    for (auto& per_user : beams.private_beams) {
      for (auto& w : per_user) w.setZero();
    }
  }
  // Keep the starting point inside the per-BS power limits.
  for (std::size_t b = 0; b < sc.topology.num_bs(); ++b) {
    const double used = beams.bs_power(sc.topology, b);
    const double cap = sc.power.bs_max_power_w[b];
    if (used > cap) {
      const double s = std::sqrt(cap / used) * (1.0 - 1e-9);
      for (auto k : sc.topology.bs_users[b]) {
        for (auto& w : beams.private_beams[k]) w *= s;
      }
      for (auto g : sc.topology.bs_groups[b]) beams.common_beams[g] *= s;
    }
  }

  IterateState s;
  s.beams = std::move(beams);
  detail::refresh_receivers(s, sc, h);
  s.common_rate_bps = detail::group_rates(s, sc);

  // Feasibility phase: maximize the worst target slack until all targets hold
  // with a small margin.
  constexpr double kMargin = 1e-7;
  double best_slack = -std::numeric_limits<double>::infinity();
  int stalled = 0;
  while (!detail::targets_met(s.common_rate_bps, sc, kMargin)) {
    if (s.feasibility_iterations >= opt.max_feasibility_iters) {
      throw InfeasibleError("common-rate targets not reached after " +
                            std::to_string(opt.max_feasibility_iters) + " feasibility iterations");
    }
    auto sp = build_subproblem(s, sc, h, opt.mode, SubproblemKind::kFeasibility, opt.phi_min);
    conic::SolverSettings settings;
    settings.tolerance = opt.conic_tolerance;
    const auto sol = conic::solve(sp.program, settings);
    if (!sol.optimal()) {
      throw SolverError("feasibility phase iteration " + std::to_string(s.feasibility_iterations) +
                        ": conic solver returned " + conic::to_string(sol.status) + " (" +
                        sol.message + ")");
    }
    auto rec = recover(sol, sp.layout, sc.topology, opt.phi_min);
    s.beams = std::move(rec.beams);
    detail::refresh_receivers(s, sc, h);
    s.common_rate_bps = detail::group_rates(s, sc);
    ++s.feasibility_iterations;

    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < s.common_rate_bps.size(); ++g) {
      slack = std::min(slack, (s.common_rate_bps[g] - sc.targets.common_bps[g]) /
                                  sc.radio.bandwidth_hz);
    }
    if (slack < 0.0 && slack <= best_slack + 1e-6 * (1.0 + std::abs(best_slack))) {
      if (++stalled >= 3) {
        throw InfeasibleError("common-rate targets unreachable: worst slack stalled at " +
                              std::to_string(slack) + " bit/s/Hz");
      }
    } else {
      stalled = 0;
    }
    best_slack = std::max(best_slack, slack);
  }
  detail::back_off_power(s, sc, h, kMargin);
  s.common_rate_bps = detail::group_rates(s, sc);
  s.trace.push_back(detail::evaluate(s, sc, h, 0));
  return s;
}

/// Feasible starting state for the optimization.
inline IterateState initialize(const Scenario& sc, const ChannelSet& h, const SolverOptions& opt) {
  return prepare_state(default_initial_beams(sc, h, opt), sc, h, opt);
}

/// Runs the alternating SCA iterations from a prepared state.
inline IterateState iterate(IterateState s, const Scenario& sc, const ChannelSet& h,
                            const SolverOptions& opt) {
  const auto& topo = sc.topology;
  const double n0 = sc.radio.noise_w;
  const double to_bits = sc.radio.bandwidth_hz / std::numbers::ln2;
  conic::SolverSettings settings;
  settings.tolerance = opt.conic_tolerance;

  s.termination = Termination::kIterationLimit;
  for (int n = 1; n <= opt.max_iters; ++n) {
    auto sp = build_subproblem(s, sc, h, opt.mode, SubproblemKind::kEnergyEfficiency, opt.phi_min);
    const auto start = interior_point(s, sp, sc);
    const auto sol = conic::solve(sp.program, settings, start);
    if (!sol.optimal()) {
      s.termination = Termination::kSolverFailure;
      s.message = "iteration " + std::to_string(n) + ": conic solver returned " +
                  conic::to_string(sol.status) + " (" + sol.message + ")";
      if (sol.status == conic::SolveStatus::kInfeasible) throw SolverError(s.message);
      return s;
    }
    auto rec = recover(sol, sp.layout, topo, opt.phi_min);
    if (rec.degenerate) {
      s.termination = Termination::kSolverFailure;
      s.message = "iteration " + std::to_string(n) + ": phi reached its lower bound";
      return s;
    }

    // MSE epigraph check with the receivers the subproblem was built on.
    double mse_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      for (std::size_t l = 0; l < rec.nu_private[k].size(); ++l) {
        mse_excess = std::max(mse_excess, mse_private(topo, h, rec.beams, s.receivers, n0, k, l) -
                                              1.0 / rec.nu_private[k][l]);
      }
      mse_excess = std::max(mse_excess, mse_common(topo, h, rec.beams, s.receivers, n0, k) -
                                            1.0 / rec.nu_common[k]);
    }

    const double previous = s.ee();
    IterateState next;
    next.beams = std::move(rec.beams);
    detail::refresh_receivers(next, sc, h);
    auto record = detail::evaluate(next, sc, h, n);
    record.scaled_objective = sol.objective * to_bits;
    record.phi = rec.phi;
    record.max_mse_excess = mse_excess;
    record.newton_steps = sol.newton_steps;
    record.solver_status = conic::to_string(sol.status);

    // Recovered objective uses the solved operating points nu_bar / phi.
    RecoveredPoint at_solve;
    at_solve.beams = next.beams;
    at_solve.nu_private = rec.nu_private;
    at_solve.nu_common = rec.nu_common;
    at_solve.rate_nats = rec.rate_nats;
    record.recovered_objective = fractional_objective(at_solve, sc) * to_bits;

    s.beams = std::move(next.beams);
    s.receivers = std::move(next.receivers);
    s.nu_private = std::move(next.nu_private);
    s.nu_common = std::move(next.nu_common);
    s.common_rate_bps = detail::group_rates(s, sc);
    s.phi = rec.phi;
    s.iteration = n;
    s.trace.push_back(record);

    const double current = record.ee_bits_per_joule;
    if (std::abs(current - previous) <= opt.rel_objective_tol * std::abs(previous)) {
      s.termination = Termination::kConverged;
      break;
    }
  }
  return s;
}

/// Initialization followed by the SCA iterations.
inline IterateState run(const Scenario& sc, const ChannelSet& h, const SolverOptions& opt) {
  return iterate(initialize(sc, h, opt), sc, h, opt);
}

/// Private streams with ||w_{k,l}||^2 > threshold * P_{b_k}.
inline std::size_t count_active_unicast_streams(const IterateState& s, const Scenario& sc,
                                                double threshold) {
  const auto& topo = sc.topology;
  std::size_t count = 0;
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    const double cap = sc.power.bs_max_power_w[topo.user_bs[k]];
    for (const auto& w : s.beams.private_beams[k]) {
      if (w.squaredNorm() > threshold * cap) ++count;
    }
  }
  return count;
}

}  // namespace bfee
