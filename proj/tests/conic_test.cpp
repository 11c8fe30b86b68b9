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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bfee/conic/barrier_solver.hpp"
#include "lp_oracle.hpp"

namespace bfee::conic {
namespace {

TEST(ConicProgram, MaximizeBoundedVariable) {
  ConicProgram prog;
  const auto x = prog.add_variable();
  prog.add_linear(AffineExpr::var(x), Relation::kLessEqual, 2.0);
  prog.set_objective(x, 1.0);
  const auto sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal) << sol.message;
  EXPECT_NEAR(sol.x[x], 2.0, 1e-6);
  EXPECT_NEAR(sol.objective, 2.0, 1e-6);
}

TEST(ConicProgram, EuclideanNormEpigraph) {
  ConicProgram prog;
  const auto x = prog.add_variable();
  prog.add_soc({AffineExpr(3.0), AffineExpr(4.0)}, AffineExpr::var(x));
  prog.set_objective(x, -1.0);
  const auto sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal) << sol.message;
  EXPECT_NEAR(sol.x[x], 5.0, 1e-6);
}

TEST(ConicProgram, ExponentialConeBound) {
  ConicProgram prog;
  const auto t = prog.add_variable();
  prog.add_exp(AffineExpr::var(t), AffineExpr(1.0), AffineExpr(std::exp(1.0)));
  prog.set_objective(t, 1.0);
  const auto sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal) << sol.message;
  EXPECT_NEAR(sol.x[t], 1.0, 1e-6);
}

TEST(ConicProgram, PerspectiveOfLogWithFixedScale) {
  // maximize t with t <= phi log(nu / phi), nu <= e, phi = 1.
  ConicProgram prog;
  const auto t = prog.add_variable();
  const auto phi = prog.add_variable();
  const auto nu = prog.add_variable();
  prog.add_linear(AffineExpr::var(phi), Relation::kEqual, 1.0);
  prog.add_linear(AffineExpr::var(nu), Relation::kLessEqual, std::exp(1.0));
  prog.add_exp(AffineExpr::var(t), AffineExpr::var(phi), AffineExpr::var(nu));
  prog.set_objective(t, 1.0);
  const auto sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal) << sol.message;
  EXPECT_NEAR(sol.objective, 1.0, 1e-6);
  EXPECT_NEAR(sol.x[phi], 1.0, 1e-9);
}

TEST(ConicProgram, ContradictoryBoundsAreInfeasible) {
  ConicProgram prog;
  const auto x = prog.add_variable();
  prog.add_linear(AffineExpr::var(x), Relation::kLessEqual, 0.0);
  prog.add_linear(AffineExpr::var(x), Relation::kLessEqual, -1.0).index;
  prog.add_linear(AffineExpr::var(x, -1.0), Relation::kLessEqual, -1.0);
  prog.set_objective(x, 1.0);
  EXPECT_EQ(solve(prog).status, SolveStatus::kInfeasible);
}

TEST(ConicProgram, InconsistentEqualitiesAreInfeasible) {
  ConicProgram prog;
  const auto x = prog.add_variable(0.0, 5.0);
  prog.add_linear(AffineExpr::var(x), Relation::kEqual, 1.0);
  prog.add_linear(AffineExpr::var(x), Relation::kEqual, 2.0);
  EXPECT_EQ(solve(prog).status, SolveStatus::kInfeasible);
}

TEST(ConicProgram, UnboundedObjectiveIsReported) {
  ConicProgram prog;
  const auto x = prog.add_variable(0.0, kInf);
  prog.set_objective(x, 1.0);
  EXPECT_EQ(solve(prog).status, SolveStatus::kUnbounded);

  ConicProgram free_prog;
  const auto y = free_prog.add_variable();
  free_prog.set_objective(y, 1.0);
  EXPECT_EQ(solve(free_prog).status, SolveStatus::kUnbounded);
}

TEST(ConicProgram, OutOfRangeIndexThrows) {
  ConicProgram prog;
  prog.add_variable();
  EXPECT_THROW(prog.add_linear(AffineExpr::var(3), Relation::kLessEqual, 1.0), std::out_of_range);
  EXPECT_THROW(prog.set_objective(1, 1.0), std::out_of_range);
  EXPECT_THROW(prog.add_exp(AffineExpr(0.0), AffineExpr::var(0), AffineExpr::var(1)),
               std::out_of_range);
}

TEST(ConicProgram, RotatedConeEncodesQuadraticOverLinear) {
  // minimize y s.t. x^2 <= y * 2 with x = 3  ->  y = 4.5
  ConicProgram prog;
  const auto x = prog.add_variable();
  const auto y = prog.add_variable();
  prog.add_linear(AffineExpr::var(x), Relation::kEqual, 3.0);
  prog.add_rotated_soc({AffineExpr::var(x)}, AffineExpr::var(y), AffineExpr(2.0));
  prog.set_objective(y, -1.0);
  const auto sol = solve(prog);
  ASSERT_TRUE(sol.optimal()) << sol.message;
  EXPECT_NEAR(sol.x[y], 4.5, 1e-6);
}

TEST(ConicProgram, SolutionsPassIndependentFeasibilityCheck) {
  // Mixed program: maximize x0 + log-like term over a disc.
  ConicProgram prog;
  const auto x0 = prog.add_variable();
  const auto x1 = prog.add_variable();
  const auto t = prog.add_variable();
  prog.add_soc({AffineExpr::var(x0), AffineExpr::var(x1)}, AffineExpr(1.0));
  prog.add_exp(AffineExpr::var(t), AffineExpr(1.0), AffineExpr::var(x1).add(AffineExpr(1.5)));
  prog.set_objective(x0, 1.0);
  prog.set_objective(t, 1.0);
  const SolverSettings settings;
  const auto a = solve(prog, settings);
  ASSERT_TRUE(a.optimal()) << a.message;
  EXPECT_LE(prog.max_violation(a.x), 10 * settings.tolerance);
  EXPECT_LE(a.gap, settings.tolerance * std::max(1.0, std::abs(a.objective)));

  const auto b = solve(prog, settings);
  EXPECT_NEAR(a.objective, b.objective, settings.tolerance);
}

TEST(ConicProgram, RandomLinearProgramsMatchVertexEnumeration) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto lp = testing_oracle::random_lp(rng, 1 + trial % 3);
    ConicProgram prog;
    for (std::size_t j = 0; j < lp.c.size(); ++j) {
      prog.add_variable(-lp.box, lp.box);
      prog.set_objective(j, lp.c[j]);
    }
    for (std::size_t i = 0; i < lp.a.size(); ++i) {
      AffineExpr row;
      for (std::size_t j = 0; j < lp.c.size(); ++j) row.add(j, lp.a[i][j]);
      prog.add_linear(row, Relation::kLessEqual, lp.b[i]);
    }
    const auto sol = solve(prog);
    ASSERT_TRUE(sol.optimal()) << "trial " << trial << ": " << sol.message;
    const double expected = testing_oracle::enumerate_vertices(lp);
    EXPECT_NEAR(sol.objective, expected, 1e-6 * (1.0 + std::abs(expected))) << "trial " << trial;
  }
}

TEST(ConicProgram, TextDumpHasOneLinePerBlock) {
  ConicProgram prog;
  const auto x = prog.add_variable(0.0, 1.0);
  prog.add_linear(AffineExpr::var(x), Relation::kLessEqual, 2.0);
  prog.add_soc({AffineExpr::var(x)}, AffineExpr(1.0));
  prog.add_exp(AffineExpr::var(x), AffineExpr(1.0), AffineExpr(3.0));
  const auto text = prog.to_text();
  EXPECT_NE(text.find("lin "), std::string::npos);
  EXPECT_NE(text.find("soc ["), std::string::npos);
  EXPECT_NE(text.find("exp ("), std::string::npos);
  EXPECT_NE(text.find("bound x0 0 1"), std::string::npos);
}

}  // namespace
}  // namespace bfee::conic
