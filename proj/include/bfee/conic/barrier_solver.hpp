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

// Path-following log-barrier interior-point method for ConicProgram.
//
// Barriers (all logarithmically homogeneous, so the central-path duality gap
// equals degree / t):
//   nonnegative ray      -log s                                  degree 1
//   second-order cone    -log(s0^2 - |s1|^2)                     degree 2
//   exponential cone     -log(q log(r/q) - p) - log q - log r    degree 3
//
// A strictly feasible start is found by a phase-I problem that shifts every
// cone along an interior direction by a scalar sigma and drives sigma below
// zero. Equality rows are kept exactly through the Newton KKT system.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bfee/conic/program.hpp"

namespace bfee::conic {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure, kIterationLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericalFailure: return "numerical-failure";
    case SolveStatus::kIterationLimit: return "iteration-limit";
  }
  return "unknown";
}

struct SolverSettings {
  double tolerance = 1e-8;       ///< relative duality gap at termination
  double barrier_growth = 16.0;  ///< factor applied to t after each centering
  int max_newton_steps = 1500;   ///< phase I and phase II combined
  double newton_tolerance = 1e-9;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::vector<double> x;  ///< empty unless status == kOptimal
  double objective = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  int newton_steps = 0;
  std::string message;

  bool optimal() const { return status == SolveStatus::kOptimal; }
};

namespace detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Cone { kNonneg, kSoc, kExp };

/// One cone in compact form: slack s = a * x[cols] + b must lie in the cone.
struct Block {
  Cone cone = Cone::kNonneg;
  std::vector<Eigen::Index> cols;
  MatrixXd a;
  VectorXd b;
  /// Nonzeros of a^T J a in global coordinates, lower triangle only
  /// (second-order cones).
  struct Entry {
    Eigen::Index row, col;
    double value;
  };
  std::vector<Entry> gram;

  /// Maximal runs of consecutive global columns: (local start, global start, length).
  struct Run {
    Eigen::Index local, global, length;
  };
  std::vector<Run> runs;

  double degree() const {
    switch (cone) {
      case Cone::kNonneg: return 1.0;
      case Cone::kSoc: return 2.0;
      case Cone::kExp: return 3.0;
    }
    return 0.0;
  }

  VectorXd interior_direction() const {
    VectorXd e = VectorXd::Zero(b.size());
    if (cone == Cone::kExp) {
      e << -1.0, 1.0, 1.0;
    } else {
      e(0) = 1.0;
    }
    return e;
  }

  void finalize() {
    runs.clear();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto li = static_cast<Eigen::Index>(i);
      if (!runs.empty() && runs.back().global + runs.back().length == cols[i]) {
        ++runs.back().length;
      } else {
        runs.push_back({li, cols[i], 1});
      }
    }
    if (cone == Cone::kSoc) {
      MatrixXd ja = a;
      ja.bottomRows(ja.rows() - 1) *= -1.0;
      const MatrixXd dense = a.transpose() * ja;
      gram.clear();
      for (Eigen::Index j = 0; j < dense.cols(); ++j) {
        for (Eigen::Index i = 0; i < dense.rows(); ++i) {
          const auto gi = cols[static_cast<std::size_t>(i)];
          const auto gj = cols[static_cast<std::size_t>(j)];
          if (dense(i, j) != 0.0 && gi >= gj) gram.push_back({gi, gj, dense(i, j)});
        }
      }
    }
  }

  VectorXd slack(const VectorXd& x) const {
    VectorXd xs(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) xs(i) = x(cols[i]);
    return a * xs + b;
  }
};

/// Logarithm of the barrier argument(s); +inf-free only inside the cone.
/// Returns false when s is not strictly interior.
inline bool log_measure(Cone cone, const VectorXd& s, double& value) {
  switch (cone) {
    case Cone::kNonneg:
      if (!(s(0) > 0.0)) return false;
      value = std::log(s(0));
      return true;
    case Cone::kSoc: {
      const double head = s(0);
      const double tail = s.tail(s.size() - 1).norm();
      if (!(head > tail)) return false;
      value = std::log(head - tail) + std::log(head + tail);
      return true;
    }
    case Cone::kExp: {
      const double p = s(0), q = s(1), r = s(2);
      if (!(q > 0.0) || !(r > 0.0)) return false;
      const double psi = q * std::log(r / q) - p;
      if (!(psi > 0.0)) return false;
      value = std::log(psi) + std::log(q) + std::log(r);
      return true;
    }
  }
  return false;
}

/// Adds the block's barrier gradient and Hessian. Only the lower triangle of
/// `hess` is meaningful afterwards. Second-order cones defer their rank-one
/// term to `rank_one` (one scaled column per cone).
inline void add_block_derivatives(const Block& blk, const VectorXd& s, VectorXd& grad,
                                  MatrixXd& hess, MatrixXd& rank_one, Eigen::Index& rank_col) {
  auto add_dense = [&](const MatrixXd& local) {
    for (const auto& rj : blk.runs) {
      for (const auto& ri : blk.runs) {
        if (ri.global + ri.length <= rj.global) continue;
        hess.block(ri.global, rj.global, ri.length, rj.length) +=
            local.block(ri.local, rj.local, ri.length, rj.length);
      }
    }
  };
  auto add_gradient = [&](const VectorXd& g) {
    for (const auto& r : blk.runs) grad.segment(r.global, r.length) += g.segment(r.local, r.length);
  };
  switch (blk.cone) {
    case Cone::kNonneg: {
      const double inv = 1.0 / s(0);
      const VectorXd row = blk.a.row(0).transpose();
      add_gradient(-inv * row);
      add_dense((inv * inv) * row * row.transpose());
      break;
    }
    case Cone::kSoc: {
      const double head = s(0);
      const double tail = s.tail(s.size() - 1).norm();
      const double det = (head - tail) * (head + tail);
      VectorXd js = s;
      js.tail(js.size() - 1) *= -1.0;
      const VectorXd v = blk.a.transpose() * js;
      add_gradient((-2.0 / det) * v);
      const double alpha = -2.0 / det;
      for (const auto& e : blk.gram) hess(e.row, e.col) += alpha * e.value;
      auto col = rank_one.col(rank_col++);
      col.setZero();
      for (const auto& r : blk.runs) {
        col.segment(r.global, r.length) = (2.0 / det) * v.segment(r.local, r.length);
      }
      break;
    }
    case Cone::kExp: {
      const double p = s(0), q = s(1), r = s(2);
      const double lrq = std::log(r / q);
      const double psi = q * lrq - p;
      Eigen::Vector3d dpsi(-1.0, lrq - 1.0, q / r);
      Eigen::Matrix3d hpsi;
      hpsi << 0.0, 0.0, 0.0, 0.0, -1.0 / q, 1.0 / r, 0.0, 1.0 / r, -q / (r * r);
      Eigen::Vector3d gs = -dpsi / psi;
      gs(1) -= 1.0 / q;
      gs(2) -= 1.0 / r;
      Eigen::Matrix3d hs = dpsi * dpsi.transpose() / (psi * psi) - hpsi / psi;
      hs(1, 1) += 1.0 / (q * q);
      hs(2, 2) += 1.0 / (r * r);
      add_gradient(blk.a.transpose() * gs);
      add_dense(blk.a.transpose() * hs * blk.a);
      break;
    }
  }
}

/// Compiles the program into compact blocks. Equalities go to (eq, eq_rhs).
struct CompiledProgram {
  Eigen::Index n = 0;
  std::vector<Block> blocks;
  MatrixXd eq;
  VectorXd eq_rhs;
  VectorXd c;
  std::vector<bool> touched;  // variable appears in some cone block
};

inline void append_row(const AffineExpr& e, double sign, std::map<VarIndex, double>& row) {
  for (const auto& [v, coef] : e.terms) row[v] += sign * coef;
}

inline Block make_block(Cone cone, const std::vector<std::map<VarIndex, double>>& rows,
                        const std::vector<double>& offsets) {
  Block blk;
  blk.cone = cone;
  std::map<VarIndex, Eigen::Index> col_pos;
  for (const auto& r : rows) {
    for (const auto& [v, coef] : r) {
      if (coef != 0.0 && !col_pos.count(v)) col_pos.emplace(v, 0);
    }
  }
  Eigen::Index pos = 0;
  for (auto& [v, p] : col_pos) {
    p = pos++;
    blk.cols.push_back(static_cast<Eigen::Index>(v));
  }
  blk.a = MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), pos);
  blk.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [v, coef] : rows[i]) {
      if (coef != 0.0) blk.a(static_cast<Eigen::Index>(i), col_pos.at(v)) = coef;
    }
    blk.b(static_cast<Eigen::Index>(i)) = offsets[i];
  }
  blk.finalize();
  return blk;
}

inline CompiledProgram compile(const ConicProgram& prog) {
  CompiledProgram cp;
  cp.n = static_cast<Eigen::Index>(prog.num_variables());
  cp.c = Eigen::Map<const VectorXd>(prog.objective().data(), cp.n);
  cp.touched.assign(prog.num_variables(), false);

  std::vector<std::map<VarIndex, double>> eq_rows;
  std::vector<double> eq_rhs;

  const auto bounds = prog.bounds();
  for (std::size_t v = 0; v < bounds.size(); ++v) {
    if (std::isfinite(bounds[v].lower)) {
      cp.blocks.push_back(make_block(Cone::kNonneg, {{{v, 1.0}}}, {-bounds[v].lower}));
    }
    if (std::isfinite(bounds[v].upper)) {
      cp.blocks.push_back(make_block(Cone::kNonneg, {{{v, -1.0}}}, {bounds[v].upper}));
    }
  }
  for (const auto& lb : prog.linear_blocks()) {
    std::map<VarIndex, double> row;
    if (lb.relation == Relation::kEqual) {
      append_row(lb.lhs, 1.0, row);
      eq_rows.push_back(std::move(row));
      eq_rhs.push_back(lb.rhs - lb.lhs.constant);
    } else {
      append_row(lb.lhs, -1.0, row);
      cp.blocks.push_back(make_block(Cone::kNonneg, {row}, {lb.rhs - lb.lhs.constant}));
    }
  }
  for (const auto& sb : prog.soc_blocks()) {
    std::vector<std::map<VarIndex, double>> rows(sb.rows.size() + 1);
    std::vector<double> offsets(sb.rows.size() + 1);
    append_row(sb.bound, 1.0, rows[0]);
    offsets[0] = sb.bound.constant;
    for (std::size_t i = 0; i < sb.rows.size(); ++i) {
      append_row(sb.rows[i], 1.0, rows[i + 1]);
      offsets[i + 1] = sb.rows[i].constant;
    }
    cp.blocks.push_back(make_block(Cone::kSoc, rows, offsets));
  }
  for (const auto& eb : prog.exp_blocks()) {
    std::vector<std::map<VarIndex, double>> rows(3);
    append_row(eb.p, 1.0, rows[0]);
    append_row(eb.q, 1.0, rows[1]);
    append_row(eb.r, 1.0, rows[2]);
    cp.blocks.push_back(
        make_block(Cone::kExp, rows, {eb.p.constant, eb.q.constant, eb.r.constant}));
  }
  for (const auto& blk : cp.blocks) {
    for (auto c : blk.cols) cp.touched[static_cast<std::size_t>(c)] = true;
  }

  cp.eq = MatrixXd::Zero(static_cast<Eigen::Index>(eq_rows.size()), cp.n);
  cp.eq_rhs = Eigen::Map<VectorXd>(eq_rhs.data(), static_cast<Eigen::Index>(eq_rhs.size()));
  for (std::size_t i = 0; i < eq_rows.size(); ++i) {
    for (const auto& [v, coef] : eq_rows[i]) {
      cp.eq(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) += coef;
    }
  }
  return cp;
}

enum class CenterOutcome { kCentered, kEarlyStop, kStepLimit, kUnbounded, kFailure };

/// Barrier problem  minimize -t c^T x + sum_i F_i(a_i x + b_i)  s.t.  eq x = eq_rhs.
class BarrierProblem {
 public:
  BarrierProblem(std::vector<Block> blocks, MatrixXd eq, VectorXd eq_rhs, VectorXd c,
                 std::vector<bool> pinned)
      : blocks_(std::move(blocks)),
        eq_(std::move(eq)),
        eq_rhs_(std::move(eq_rhs)),
        c_(std::move(c)),
        pinned_(std::move(pinned)) {
    for (const auto& b : blocks_) {
      degree_ += b.degree();
      if (b.cone == Cone::kSoc) ++soc_count_;
    }
  }

  double degree() const { return degree_; }
  const VectorXd& c() const { return c_; }

  bool interior(const VectorXd& x, std::vector<VectorXd>* slacks = nullptr,
                std::vector<double>* logs = nullptr) const {
    if (slacks) slacks->resize(blocks_.size());
    if (logs) logs->resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      VectorXd s = blocks_[i].slack(x);
      double lv = 0.0;
      if (!log_measure(blocks_[i].cone, s, lv)) return false;
      if (slacks) (*slacks)[i] = std::move(s);
      if (logs) (*logs)[i] = lv;
    }
    return true;
  }

  void derivatives(const std::vector<VectorXd>& slacks, VectorXd& grad, MatrixXd& hess) const {
    const auto n = c_.size();
    grad = VectorXd::Zero(n);
    hess = MatrixXd::Zero(n, n);
    rank_one_.resize(n, soc_count_);
    Eigen::Index rank_col = 0;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      add_block_derivatives(blocks_[i], slacks[i], grad, hess, rank_one_, rank_col);
    }
    if (soc_count_ > 0) hess.selfadjointView<Eigen::Lower>().rankUpdate(rank_one_);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (pinned_[static_cast<std::size_t>(j)]) hess(j, j) += 1.0;
    }
    hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
  }

  /// Newton direction for  grad, hess  with equality correction rhs.
  bool newton_direction(const VectorXd& grad, const MatrixXd& hess, const VectorXd& x,
                        VectorXd& dx) const {
    const auto n = grad.size();
    // Symmetric diagonal scaling keeps the factorization well conditioned as
    // the barrier weight grows.
    VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = std::abs(hess(i, i));
      d(i) = h > 0.0 ? 1.0 / std::sqrt(h) : 1.0;
    }
    MatrixXd hs = d.asDiagonal() * hess * d.asDiagonal();
    VectorXd gs = d.cwiseProduct(grad);
    const Eigen::LLT<MatrixXd> llt(hs);
    if (llt.info() == Eigen::Success) {
      if (eq_.rows() == 0) {
        VectorXd y = llt.solve(-gs);
        // Iterative refinement recovers accuracy lost to ill conditioning
        // near the cone boundary.
        for (int pass = 0; pass < 2; ++pass) {
          const VectorXd r = -gs - hs.selfadjointView<Eigen::Lower>() * y;
          y += llt.solve(r);
        }
        dx = d.cwiseProduct(y);
      } else {
        // Eliminate the equality multipliers through the Schur complement.
        const MatrixXd es = eq_ * d.asDiagonal();
        const MatrixXd hinv_et = llt.solve(es.transpose());
        const Eigen::LDLT<MatrixXd> small(es * hinv_et);
        if (small.info() != Eigen::Success) return false;
        // [hs es^T; es 0] [y; lambda] = [r1; r2]
        auto kkt_solve = [&](const VectorXd& r1, const VectorXd& r2, VectorXd& y, VectorXd& lambda) {
          const VectorXd hinv_r1 = llt.solve(r1);
          lambda = small.solve(es * hinv_r1 - r2);
          y = hinv_r1 - hinv_et * lambda;
        };
        const VectorXd resid = eq_rhs_ - eq_ * x;
        VectorXd y, lambda, dy, dl;
        kkt_solve(-gs, resid, y, lambda);
        for (int pass = 0; pass < 2; ++pass) {
          const VectorXd r1 = -gs - hs.selfadjointView<Eigen::Lower>() * y - es.transpose() * lambda;
          const VectorXd r2 = resid - es * y;
          kkt_solve(r1, r2, dy, dl);
          y += dy;
          lambda += dl;
        }
        dx = d.cwiseProduct(y);
      }
    } else if (eq_.rows() == 0) {
      const Eigen::LDLT<MatrixXd> ldlt(hs);
      if (ldlt.info() != Eigen::Success) return false;
      dx = d.cwiseProduct(ldlt.solve(-gs));
    } else {
      const auto m = eq_.rows();
      MatrixXd kkt = MatrixXd::Zero(n + m, n + m);
      const MatrixXd es = eq_ * d.asDiagonal();
      kkt.topLeftCorner(n, n) = hs;
      kkt.topRightCorner(n, m) = es.transpose();
      kkt.bottomLeftCorner(m, n) = es;
      VectorXd rhs(n + m);
      rhs.head(n) = -gs;
      rhs.tail(m) = eq_rhs_ - eq_ * x;
      const Eigen::PartialPivLU<MatrixXd> lu(kkt);
      dx = d.cwiseProduct(lu.solve(rhs).head(n));
    }
    return dx.allFinite();
  }

  /// Damped Newton centering at barrier weight t.
  CenterOutcome center(VectorXd& x, double t, double newton_tol, int& steps_left,
                       double unbounded_limit,
                       const std::function<bool(const VectorXd&)>& early_stop) const {
    std::vector<VectorXd> slacks, trial_slacks;
    std::vector<double> logs, trial_logs;
    if (!interior(x, &slacks, &logs)) return CenterOutcome::kFailure;
    VectorXd grad, dx;
    MatrixXd hess;
    for (;;) {
      derivatives(slacks, grad, hess);
      grad -= t * c_;
      if (!newton_direction(grad, hess, x, dx)) return CenterOutcome::kFailure;
      const double decrement = -grad.dot(dx);
      // An indefinite factorization shows up as a negative decrement.
      if (decrement < -1e-9 * (1.0 + std::abs(grad.dot(x)))) return CenterOutcome::kFailure;
      if (decrement * 0.5 <= newton_tol) return CenterOutcome::kCentered;
      if (steps_left <= 0) return CenterOutcome::kStepLimit;

      double alpha = 1.0;
      bool accepted = false;
      const double slope = grad.dot(dx);
      const double obj_slope = c_.dot(dx);
      while (alpha > 1e-14) {
        const VectorXd trial = x + alpha * dx;
        if (interior(trial, &trial_slacks, &trial_logs)) {
          double change = -t * alpha * obj_slope;
          for (std::size_t i = 0; i < logs.size(); ++i) change -= trial_logs[i] - logs[i];
          if (change <= 0.25 * alpha * slope + 1e-13 * std::abs(t * alpha * obj_slope)) {
            x = trial;
            slacks.swap(trial_slacks);
            logs.swap(trial_logs);
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      --steps_left;
      // Rounding floor: no acceptable step, backtracking on an already tiny
      // decrement, or steps lost in the last digits of x.
      const double floor_scale = std::max(1.0, degree_);
      if (!accepted) {
        return decrement < 1e-3 * floor_scale ? CenterOutcome::kCentered : CenterOutcome::kFailure;
      }
      if (alpha < 1.0 && decrement < 1e-5 * floor_scale) return CenterOutcome::kCentered;
      if (alpha < 1e-3 && decrement < 1e-3 * floor_scale) return CenterOutcome::kCentered;
      if (alpha * dx.norm() <= 1e-13 * (1.0 + x.norm())) {
        return decrement < 1e-3 * floor_scale ? CenterOutcome::kCentered : CenterOutcome::kFailure;
      }
      if (std::abs(c_.dot(x)) > unbounded_limit) return CenterOutcome::kUnbounded;
      if (early_stop && early_stop(x)) return CenterOutcome::kEarlyStop;
    }
  }

  /// Barrier weight that best balances the objective against the barrier
  /// gradient at x.
  double initial_weight(const VectorXd& x) const {
    std::vector<VectorXd> slacks;
    if (!interior(x, &slacks)) return 1.0;
    VectorXd grad;
    MatrixXd hess;
    derivatives(slacks, grad, hess);
    if (c_.squaredNorm() == 0.0) return 1.0;
    Eigen::LDLT<MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) return 1.0;
    const VectorXd hc = ldlt.solve(c_);
    const double denom = c_.dot(hc);
    const double t = hc.dot(grad) / denom;
    if (!std::isfinite(t) || t <= 0.0) return 1.0;
    return std::clamp(t, 1e-6, 1e6);
  }

 private:
  std::vector<Block> blocks_;
  MatrixXd eq_;
  VectorXd eq_rhs_;
  VectorXd c_;
  std::vector<bool> pinned_;
  double degree_ = 0.0;
  Eigen::Index soc_count_ = 0;
  mutable MatrixXd rank_one_;
};

/// Smallest shift along the cone's interior direction that makes s interior
/// (not minimal for the exponential cone; any valid shift suffices).
inline double required_shift(const Block& blk, const VectorXd& s) {
  switch (blk.cone) {
    case Cone::kNonneg: return -s(0);
    case Cone::kSoc: return s.tail(s.size() - 1).norm() - s(0);
    case Cone::kExp: {
      const VectorXd e = blk.interior_direction();
      double lv = 0.0;
      if (log_measure(Cone::kExp, s, lv)) return -1e-3;
      double sigma = std::max({0.0, -s(1), -s(2)}) + 1e-3 * (1.0 + s.cwiseAbs().maxCoeff());
      while (!log_measure(Cone::kExp, VectorXd(s + sigma * e), lv)) sigma *= 2.0;
      return sigma;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Initial phase-I shift when starting from a nearly feasible caller point.
inline constexpr double kSeededShift = 1e-4;
inline constexpr double kSeededBoxScale = 1e2;
/// Relative cone margin a caller point needs to skip phase I.
inline constexpr double kWarmMargin = 1e-6;
inline constexpr double kPhaseOneBoxScale = 1e6;

/// Solves  maximize c^T x  over the program's constraints.
/// `start`, when given, is tried as the phase-II starting point; phase I runs
/// only if it is not strictly feasible.
inline ConicSolution solve(const ConicProgram& program, const SolverSettings& settings = {},
                           std::span<const double> start = {}) {
  using detail::Block;
  using detail::CenterOutcome;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  ConicSolution out;
  const auto cp = detail::compile(program);
  const auto n = cp.n;
  int steps_left = settings.max_newton_steps;

  // Variables that appear in no cone: free along the objective unless pinned
  // by an equality.
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    if (cp.touched[uj]) continue;
    const bool in_eq = cp.eq.rows() > 0 && cp.eq.col(j).cwiseAbs().maxCoeff() > 0.0;
    if (!in_eq) {
      if (cp.c(j) != 0.0) {
        out.status = SolveStatus::kUnbounded;
        out.message = "variable x" + std::to_string(j) + " is unconstrained";
        return out;
      }
      pinned[uj] = true;
    }
  }

  // Start satisfying the equalities.
  VectorXd x = VectorXd::Zero(n);
  if (cp.eq.rows() > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(cp.eq);
    x = cod.solve(cp.eq_rhs);
    const double resid = (cp.eq * x - cp.eq_rhs).norm();
    if (!(resid <= 1e-9 * (1.0 + cp.eq_rhs.norm()))) {
      out.status = SolveStatus::kInfeasible;
      out.message = "inconsistent equality constraints";
      return out;
    }
  }

  bool warm = false;
  bool seeded = false;  // phase I starts from the caller's point
  if (start.size() == static_cast<std::size_t>(n)) {
    const VectorXd x0 = Eigen::Map<const VectorXd>(start.data(), n);
    warm = x0.allFinite() &&
           (cp.eq.rows() == 0 ||
            (cp.eq * x0 - cp.eq_rhs).norm() <= 1e-12 * (1.0 + cp.eq_rhs.norm()));
    for (const auto& blk : cp.blocks) {
      if (!warm) break;
      const VectorXd sl = blk.slack(x0);
      warm = detail::required_shift(blk, sl) < -kWarmMargin * (1.0 + sl.cwiseAbs().maxCoeff());
    }
    seeded = !warm && x0.allFinite() && cp.eq.rows() == 0;
    if (warm || seeded) x = x0;
  }

  // Phase I.
  double needed = -std::numeric_limits<double>::infinity();
  double scale = 1.0;
  for (const auto& blk : cp.blocks) {
    const VectorXd s = blk.slack(x);
    needed = std::max(needed, detail::required_shift(blk, s));
    scale = std::max(scale, s.cwiseAbs().maxCoeff());
  }
  if (!warm && (needed >= 0.0 || seeded)) {
    std::vector<Block> shifted = cp.blocks;
    for (auto& blk : shifted) {
      blk.cols.push_back(n);
      blk.a.conservativeResize(Eigen::NoChange, blk.a.cols() + 1);
      blk.a.col(blk.a.cols() - 1) = blk.interior_direction();
      blk.finalize();
    }
    // A wide box around the start keeps the phase-I barrier bounded below
    // along directions the cones do not constrain.
    const double radius = (seeded ? kSeededBoxScale : kPhaseOneBoxScale) *
                          (1.0 + x.cwiseAbs().maxCoeff() + scale);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (pinned[static_cast<std::size_t>(j)]) continue;
      for (const double sign : {1.0, -1.0}) {
        Block box;
        box.cone = detail::Cone::kNonneg;
        box.cols = {j};
        box.a = MatrixXd::Constant(1, 1, sign);
        box.b = VectorXd::Constant(1, radius - sign * x(j));
        box.finalize();
        shifted.push_back(std::move(box));
      }
    }
    MatrixXd eq1 = MatrixXd::Zero(cp.eq.rows(), n + 1);
    eq1.leftCols(n) = cp.eq;
    VectorXd c1 = VectorXd::Zero(n + 1);
    c1(n) = -1.0;
    auto pinned1 = pinned;
    pinned1.push_back(false);
    detail::BarrierProblem phase1(std::move(shifted), eq1, cp.eq_rhs, c1, pinned1);

    VectorXd x1(n + 1);
    x1.head(n) = x;
    x1(n) = needed + (seeded ? kSeededShift : std::max(1.0, 0.1 * std::abs(needed)));
    double t = phase1.initial_weight(x1);
    const double sigma0 = x1(n);
    bool found = false;
    // From a caller point, keep going until the margin is usable.
    const double exit_level = seeded ? -0.5 * kSeededShift : 0.0;
    auto below_zero = [n, exit_level](const VectorXd& z) { return z(n) < exit_level; };
    for (;;) {
      const auto oc = phase1.center(x1, t, settings.newton_tolerance, steps_left,
                                    std::numeric_limits<double>::infinity(), below_zero);
      if (oc == CenterOutcome::kEarlyStop || x1(n) < exit_level ||
          (oc == CenterOutcome::kCentered && x1(n) < 0.0)) {
        found = true;
        break;
      }
      if (oc == CenterOutcome::kStepLimit) {
        out.status = SolveStatus::kIterationLimit;
        out.message = "phase I step limit";
        break;
      }
      if (oc == CenterOutcome::kFailure) {
        out.status = SolveStatus::kNumericalFailure;
        out.message = "phase I Newton failure";
        break;
      }
      const double bound_gap = phase1.degree() / t;
      if (x1(n) - bound_gap > 1e-10 * (1.0 + std::abs(sigma0))) {
        out.status = SolveStatus::kInfeasible;
        out.message = "phase I certificate: no feasible point within the search box";
        break;
      }
      if (bound_gap < 1e-13 * (1.0 + std::abs(sigma0))) {
        out.status = SolveStatus::kInfeasible;
        out.message = "no strictly feasible point";
        break;
      }
      t *= settings.barrier_growth;
    }
    out.newton_steps = settings.max_newton_steps - steps_left;
    if (!found) return out;
    x = x1.head(n);
  }

  // Phase II.
  detail::BarrierProblem phase2(cp.blocks, cp.eq, cp.eq_rhs, cp.c, pinned);
  double t = std::max(phase2.initial_weight(x),
                      0.1 * phase2.degree() / (1.0 + std::abs(cp.c.dot(x))));
  const double unbounded_limit = 1e12 * (1.0 + std::abs(cp.c.dot(x)) + scale);
  for (;;) {
    const auto oc = phase2.center(x, t, settings.newton_tolerance, steps_left, unbounded_limit, {});
    out.newton_steps = settings.max_newton_steps - steps_left;
    if (oc == CenterOutcome::kUnbounded) {
      out.status = SolveStatus::kUnbounded;
      out.message = "objective grows without bound";
      return out;
    }
    if (oc == CenterOutcome::kStepLimit) {
      out.status = SolveStatus::kIterationLimit;
      out.message = "phase II step limit";
      out.objective = cp.c.dot(x);
      out.gap = phase2.degree() / t;
      return out;
    }
    if (oc == CenterOutcome::kFailure) {
      out.status = SolveStatus::kNumericalFailure;
      out.message = "phase II Newton failure at t=" + std::to_string(t);
      out.objective = cp.c.dot(x);
      out.gap = phase2.degree() / t;
      return out;
    }
    const double objective = cp.c.dot(x);
    const double gap = phase2.degree() / t;
    if (gap <= settings.tolerance * std::max(1.0, std::abs(objective))) {
      out.status = SolveStatus::kOptimal;
      out.x.assign(x.data(), x.data() + n);
      out.objective = objective;
      out.gap = gap;
      return out;
    }
    t *= settings.barrier_growth;
  }
}

}  // namespace bfee::conic
