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

// Real-valued conic program representation: a linear objective (maximized)
// subject to linear rows, second-order cones and exponential cones over
// affine expressions of the decision vector.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bfee::conic {

using VarIndex = std::size_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Sparse affine function  sum_j coef_j * x[var_j] + constant.
struct AffineExpr {
  std::vector<std::pair<VarIndex, double>> terms;
  double constant = 0.0;

  AffineExpr() = default;
  explicit AffineExpr(double c) : constant(c) {}

  static AffineExpr var(VarIndex v, double coef = 1.0) {
    AffineExpr e;
    e.terms.emplace_back(v, coef);
    return e;
  }

  AffineExpr& add(VarIndex v, double coef) {
    if (coef != 0.0) terms.emplace_back(v, coef);
    return *this;
  }
  AffineExpr& add(const AffineExpr& other, double scale = 1.0) {
    for (const auto& [v, c] : other.terms) add(v, scale * c);
    constant += scale * other.constant;
    return *this;
  }
  AffineExpr& scale(double s) {
    for (auto& t : terms) t.second *= s;
    constant *= s;
    return *this;
  }

  double evaluate(std::span<const double> x) const {
    double acc = constant;
    for (const auto& [v, c] : terms) acc += c * x[v];
    return acc;
  }

  VarIndex max_index_plus_one() const {
    VarIndex m = 0;
    for (const auto& t : terms) m = std::max(m, t.first + 1);
    return m;
  }
};

inline AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a.add(b); }
inline AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a.add(b, -1.0); }
inline AffineExpr operator*(double s, AffineExpr a) { return a.scale(s); }

enum class Relation { kLessEqual, kEqual };

/// lhs (<= | =) rhs
struct LinearBlock {
  AffineExpr lhs;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;
};

/// || rows ||_2 <= bound
struct SocBlock {
  std::vector<AffineExpr> rows;
  AffineExpr bound;
};

/// (p, q, r) in closure{ q > 0, q exp(p / q) <= r }
struct ExpBlock {
  AffineExpr p, q, r;
};

enum class BlockKind { kLinear, kSoc, kExp };

struct BlockId {
  BlockKind kind;
  std::size_t index;
};

struct VariableBounds {
  double lower = -kInf;
  double upper = kInf;
};

class ConicProgram {
 public:
  VarIndex add_variable(double lower = -kInf, double upper = kInf) {
    bounds_.push_back({lower, upper});
    objective_.push_back(0.0);
    return bounds_.size() - 1;
  }

  /// Appends `count` free variables and returns the index of the first.
  VarIndex add_variables(std::size_t count) {
    const VarIndex first = bounds_.size();
    for (std::size_t i = 0; i < count; ++i) add_variable();
    return first;
  }

  void set_bounds(VarIndex v, double lower, double upper) {
    check_index(v);
    bounds_[v] = {lower, upper};
  }

  /// Sets the coefficient of x[v] in the maximized objective.
  void set_objective(VarIndex v, double coef) {
    check_index(v);
    objective_[v] = coef;
  }

  BlockId add_linear(AffineExpr lhs, Relation rel, double rhs) {
    check_expr(lhs);
    linear_.push_back({std::move(lhs), rel, rhs});
    return {BlockKind::kLinear, linear_.size() - 1};
  }

  BlockId add_soc(std::vector<AffineExpr> rows, AffineExpr bound) {
    for (const auto& r : rows) check_expr(r);
    check_expr(bound);
    soc_.push_back({std::move(rows), std::move(bound)});
    return {BlockKind::kSoc, soc_.size() - 1};
  }

  /// ||rows||^2 <= x * y with x, y >= 0, as the cone
  /// ||(2 rows, x - y)|| <= x + y.
  BlockId add_rotated_soc(std::vector<AffineExpr> rows, const AffineExpr& x,
                          const AffineExpr& y) {
    for (auto& r : rows) r.scale(2.0);
    rows.push_back(x - y);
    return add_soc(std::move(rows), x + y);
  }

  BlockId add_exp(AffineExpr p, AffineExpr q, AffineExpr r) {
    check_expr(p);
    check_expr(q);
    check_expr(r);
    exp_.push_back({std::move(p), std::move(q), std::move(r)});
    return {BlockKind::kExp, exp_.size() - 1};
  }

  std::size_t num_variables() const { return bounds_.size(); }
  std::span<const double> objective() const { return objective_; }
  std::span<const VariableBounds> bounds() const { return bounds_; }
  std::span<const LinearBlock> linear_blocks() const { return linear_; }
  std::span<const SocBlock> soc_blocks() const { return soc_; }
  std::span<const ExpBlock> exp_blocks() const { return exp_; }

  double objective_value(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < objective_.size(); ++i) acc += objective_[i] * x[i];
    return acc;
  }

  /// Largest constraint violation of `x`, evaluated directly on the blocks.
  /// Exponential cone membership is measured as max(-q, q exp(p/q) - r)
  /// relative to max(1, |r|).
  double max_violation(std::span<const double> x) const {
    if (x.size() != num_variables()) {
      throw std::invalid_argument("conic: point has wrong dimension");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
      worst = std::max(worst, bounds_[i].lower - x[i]);
      worst = std::max(worst, x[i] - bounds_[i].upper);
    }
    for (const auto& b : linear_) {
      const double d = b.lhs.evaluate(x) - b.rhs;
      worst = std::max(worst, b.relation == Relation::kEqual ? std::abs(d) : d);
    }
    for (const auto& b : soc_) {
      double sq = 0.0;
      for (const auto& r : b.rows) {
        const double v = r.evaluate(x);
        sq += v * v;
      }
      worst = std::max(worst, std::sqrt(sq) - b.bound.evaluate(x));
    }
    for (const auto& b : exp_) {
      const double p = b.p.evaluate(x), q = b.q.evaluate(x), r = b.r.evaluate(x);
      double v = -q;
      if (q > 0.0) {
        v = std::max(v, (q * std::exp(p / q) - r) / std::max(1.0, std::abs(r)));
      } else if (q == 0.0) {
        v = std::max(v, std::max(p, -r));  // closure: p <= 0, r >= 0
      }
      worst = std::max(worst, v);
    }
    return worst;
  }

  /// Text dump, one block per line, for cross-checking with other solvers.
  void write_text(std::ostream& os) const {
    os << "vars " << num_variables() << "\n";
    os << "max";
    for (std::size_t i = 0; i < objective_.size(); ++i) {
      if (objective_[i] != 0.0) os << " " << objective_[i] << "*x" << i;
    }
    os << "\n";
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
      if (std::isfinite(bounds_[i].lower) || std::isfinite(bounds_[i].upper)) {
        os << "bound x" << i << " " << bounds_[i].lower << " " << bounds_[i].upper << "\n";
      }
    }
    for (const auto& b : linear_) {
      os << "lin ";
      write_expr(os, b.lhs);
      os << (b.relation == Relation::kEqual ? " = " : " <= ") << b.rhs << "\n";
    }
    for (const auto& b : soc_) {
      os << "soc [";
      for (std::size_t r = 0; r < b.rows.size(); ++r) {
        if (r) os << "; ";
        write_expr(os, b.rows[r]);
      }
      os << "] <= ";
      write_expr(os, b.bound);
      os << "\n";
    }
    for (const auto& b : exp_) {
      os << "exp (";
      write_expr(os, b.p);
      os << ", ";
      write_expr(os, b.q);
      os << ", ";
      write_expr(os, b.r);
      os << ")\n";
    }
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    write_text(os);
    return os.str();
  }

 private:
  void check_index(VarIndex v) const {
    if (v >= num_variables()) {
      throw std::out_of_range("conic: variable index " + std::to_string(v) +
                              " out of range (n=" + std::to_string(num_variables()) + ")");
    }
  }
  void check_expr(const AffineExpr& e) const {
    if (e.max_index_plus_one() > num_variables()) {
      check_index(e.max_index_plus_one() - 1);
    }
  }
  static void write_expr(std::ostream& os, const AffineExpr& e) {
    os << e.constant;
    for (const auto& [v, c] : e.terms) os << (c < 0 ? " - " : " + ") << std::abs(c) << "*x" << v;
  }

  std::vector<VariableBounds> bounds_;
  std::vector<double> objective_;
  std::vector<LinearBlock> linear_;
  std::vector<SocBlock> soc_;
  std::vector<ExpBlock> exp_;
};

}  // namespace bfee::conic
