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

#include "bfee/sca.hpp"
#include "test_util.hpp"

namespace {

using bfee::IterateState;
using bfee::Mode;
using bfee::SolverOptions;

IterateState unsolved_state(const bfee::Scenario& sc, const bfee::ChannelSet& h, Mode mode) {
  SolverOptions opt;
  opt.mode = mode;
  IterateState s;
  s.beams = bfee::default_initial_beams(sc, h, opt);
  bfee::detail::refresh_receivers(s, sc, h);
  return s;
}

bfee::Scenario scenario_with_rate(double rate_mbps, std::size_t m = 2, std::size_t n = 4) {
  return testing_util::default_scenario(1, n, m, rate_mbps);
}

// ---------------------------------------------------------------------------
// Tangent of 1/nu

TEST(InverseTangent, Examples) {
  EXPECT_DOUBLE_EQ(bfee::linearize_inverse(1.0)(1.0), 1.0);
  EXPECT_DOUBLE_EQ(bfee::linearize_inverse(1.0)(2.0), 0.0);
  EXPECT_DOUBLE_EQ(bfee::linearize_inverse(2.0)(2.0), 0.5);
  const auto t = bfee::linearize_inverse(4.0);
  EXPECT_DOUBLE_EQ(t.intercept(), 0.5);
  EXPECT_DOUBLE_EQ(t.slope(), -1.0 / 16.0);
}

TEST(InverseTangent, RejectsNonPositivePoint) {
  EXPECT_THROW(bfee::linearize_inverse(0.0), std::invalid_argument);
  EXPECT_THROW(bfee::linearize_inverse(-1.0), std::invalid_argument);
  EXPECT_THROW(bfee::linearize_inverse(std::nan("")), std::invalid_argument);
}

TEST(InverseTangent, UnderEstimatesInverse) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> log_nu(std::log(1e-3), std::log(1e3));
  for (int p = 0; p < 100; ++p) {
    const double point = std::exp(log_nu(rng));
    const auto tan = bfee::linearize_inverse(point);
    EXPECT_NEAR(tan(point), 1.0 / point, 1e-12 * (1.0 / point));
    for (int i = 0; i < 1000; ++i) {
      const double nu = std::exp(log_nu(rng));
      ASSERT_LE(tan(nu), 1.0 / nu) << "point " << point << " nu " << nu;
    }
  }
}

// ---------------------------------------------------------------------------
// Subproblem assembly

TEST(Subproblem, DefaultNetworkBlockCounts) {
  const auto sc = scenario_with_rate(72.14);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 1);
  const auto sp = bfee::build_subproblem(unsolved_state(sc, h, Mode::kJoint), sc, h, Mode::kJoint);
  // 2 per-BS power cones, 1 denominator, 8 private + 8 common MSE cones.
  EXPECT_EQ(sp.program.soc_blocks().size(), 2u + 1u + 16u);
  // 8 private log-rate epigraphs, 8 common-rate epigraphs.
  EXPECT_EQ(sp.program.exp_blocks().size(), 16u);
  EXPECT_EQ(sp.program.linear_blocks().size(), 4u);
  // 8*4*2 + 4*4*2 + phi + 16 nu + 4 r + 8 t
  EXPECT_EQ(sp.program.num_variables(), 125u);
  EXPECT_FALSE(sp.layout.slack.has_value());
}

TEST(Subproblem, MulticastOnlyHasNoPrivateBlocks) {
  const auto sc = scenario_with_rate(72.14);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 1);
  const auto sp = bfee::build_subproblem(unsolved_state(sc, h, Mode::kMulticastOnly), sc, h,
                                         Mode::kMulticastOnly);
  EXPECT_EQ(sp.program.soc_blocks().size(), 2u + 1u + 8u);
  EXPECT_EQ(sp.program.exp_blocks().size(), 8u);
  EXPECT_EQ(sp.program.num_variables(), 4u * 4u * 2u + 1u + 8u + 4u);
  for (const auto& per_user : sp.layout.private_beam) EXPECT_TRUE(per_user.empty());
  for (const auto& per_user : sp.layout.t_private) EXPECT_TRUE(per_user.empty());
}

TEST(Subproblem, FeasibilityVariantDropsDenominator) {
  const auto sc = scenario_with_rate(72.14);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 1);
  const auto sp = bfee::build_subproblem(unsolved_state(sc, h, Mode::kJoint), sc, h, Mode::kJoint,
                                         bfee::SubproblemKind::kFeasibility);
  EXPECT_EQ(sp.program.soc_blocks().size(), 2u + 16u);
  ASSERT_TRUE(sp.layout.slack.has_value());
  // Four rate rows plus phi = 1.
  EXPECT_EQ(sp.program.linear_blocks().size(), 5u);
  EXPECT_EQ(sp.program.num_variables(), 126u);
}

TEST(Subproblem, CurrentPointIsStrictlyFeasible) {
  const auto sc = scenario_with_rate(0.0);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 2);
  const auto s = unsolved_state(sc, h, Mode::kJoint);
  const auto sp = bfee::build_subproblem(s, sc, h, Mode::kJoint);
  const auto x = bfee::interior_point(s, sp, sc);
  ASSERT_EQ(x.size(), sp.program.num_variables());
  EXPECT_LE(sp.program.max_violation(x), 0.0);
}

TEST(Subproblem, NoInteriorPointWhenTargetMissed) {
  const auto sc = scenario_with_rate(500.0);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 2);
  const auto s = unsolved_state(sc, h, Mode::kJoint);
  const auto sp = bfee::build_subproblem(s, sc, h, Mode::kJoint);
  EXPECT_TRUE(bfee::interior_point(s, sp, sc).empty());
}

// ---------------------------------------------------------------------------
// Recovery

struct TinyLayout {
  bfee::Topology topo = testing_util::single_link(2, 1);
  bfee::SubproblemLayout lay;
  TinyLayout() {
    lay.private_beam.resize(1);
    lay.nu_private.resize(1);
    lay.t_private.resize(1);
    lay.common_beam = {0};
    lay.phi = 4;
    lay.nu_common = {5};
    lay.rate = {6};
  }
};

bfee::conic::ConicSolution optimal(std::vector<double> x) {
  bfee::conic::ConicSolution sol;
  sol.status = bfee::conic::SolveStatus::kOptimal;
  sol.x = std::move(x);
  return sol;
}

TEST(Recover, DividesByPhi) {
  const TinyLayout t;
  const auto p = bfee::recover(optimal({2.0, 0.0, 0.0, 0.0, 2.0, 6.0, 4.0}), t.lay, t.topo);
  EXPECT_EQ(p.beams.common_beams[0], Eigen::Vector2cd(1.0, 0.0));
  EXPECT_DOUBLE_EQ(p.nu_common[0], 3.0);
  EXPECT_DOUBLE_EQ(p.rate_nats[0], 2.0);
  EXPECT_DOUBLE_EQ(p.phi, 2.0);
  EXPECT_FALSE(p.degenerate);
}

TEST(Recover, UnitPhiIsIdentity) {
  const TinyLayout t;
  const auto p = bfee::recover(optimal({0.5, -1.0, 2.0, 3.0, 1.0, 7.0, 0.25}), t.lay, t.topo);
  EXPECT_EQ(p.beams.common_beams[0], Eigen::Vector2cd(bfee::Complex(0.5, -1.0), bfee::Complex(2.0, 3.0)));
  EXPECT_DOUBLE_EQ(p.nu_common[0], 7.0);
  EXPECT_DOUBLE_EQ(p.rate_nats[0], 0.25);
}

TEST(Recover, FlagsPhiAtLowerBound) {
  const TinyLayout t;
  const auto p = bfee::recover(optimal({0.0, 0.0, 0.0, 0.0, 1e-8, 1e-8, 0.0}), t.lay, t.topo);
  EXPECT_TRUE(p.degenerate);
}

TEST(Recover, RejectsNonOptimalSolution) {
  const TinyLayout t;
  bfee::conic::ConicSolution sol;
  sol.status = bfee::conic::SolveStatus::kIterationLimit;
  EXPECT_THROW(bfee::recover(sol, t.lay, t.topo), bfee::SolverError);
  EXPECT_THROW(bfee::recover(optimal({0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0}), t.lay, t.topo),
               bfee::SolverError);
}

// ---------------------------------------------------------------------------
// Active stream counting

TEST(ActiveStreams, Examples) {
  const auto sc = scenario_with_rate(0.0);
  IterateState s;
  s.beams = bfee::BeamformerSet::zeros(sc.topology);
  EXPECT_EQ(bfee::count_active_unicast_streams(s, sc, 1e-6), 0u);

  s.beams.private_beams[3][0](0) = std::sqrt(sc.power.bs_max_power_w[sc.topology.user_bs[3]]);
  EXPECT_EQ(bfee::count_active_unicast_streams(s, sc, 1e-6), 1u);

  const auto sc1 = scenario_with_rate(0.0, 1);
  IterateState s1;
  s1.beams = bfee::BeamformerSet::zeros(sc1.topology);
  EXPECT_EQ(bfee::count_active_unicast_streams(s1, sc1, 1e-6), 0u);
}

// ---------------------------------------------------------------------------
// Initialization

TEST(Initialize, ZeroTargetsNeedNoFeasibilityPhase) {
  const auto sc = scenario_with_rate(0.0);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 3);
  const auto s = bfee::initialize(sc, h, {});
  EXPECT_EQ(s.feasibility_iterations, 0);
  ASSERT_EQ(s.trace.size(), 1u);
  const auto& topo = sc.topology;
  const double n0 = sc.radio.noise_w;
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
      const double eps = bfee::mse_private(topo, h, s.beams, s.receivers, n0, k, l);
      EXPECT_NEAR(s.nu_private[k][l], 1.0 / eps, 1e-12 / eps);
    }
    const double eps = bfee::mse_common(topo, h, s.beams, s.receivers, n0, k);
    EXPECT_NEAR(s.nu_common[k], 1.0 / eps, 1e-12 / eps);
  }
}

TEST(Initialize, SingleReceiveAntennaHasNoPrivateStreams) {
  const auto sc = scenario_with_rate(115.42, 1, 8);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 1);
  const auto s = bfee::initialize(sc, h, {});
  for (const auto& per_user : s.beams.private_beams) EXPECT_TRUE(per_user.empty());
  for (const auto& per_user : s.nu_private) EXPECT_TRUE(per_user.empty());
}

TEST(Initialize, UnreachableTargetIsInfeasible) {
  const auto sc = scenario_with_rate(1e6);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 1);
  EXPECT_THROW(bfee::initialize(sc, h, {}), bfee::InfeasibleError);
}

TEST(Initialize, MeetsTargetsAndPowerLimits) {
  const auto sc = scenario_with_rate(72.14);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 1);
  const auto s = bfee::initialize(sc, h, {});
  const auto& rec = s.trace.front();
  EXPECT_GE(rec.min_common_rate_ratio, 1.0 - 1e-6);
  EXPECT_LE(rec.max_bs_power_ratio, 1.0 + 1e-6);
}

TEST(Initialize, RejectsInvalidOptions) {
  const auto sc = scenario_with_rate(0.0);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 1);
  SolverOptions opt;
  opt.rel_objective_tol = 0.0;
  EXPECT_THROW(bfee::initialize(sc, h, opt), bfee::ConfigError);
  opt = {};
  opt.initial_common_power_fraction = 0.9;
  EXPECT_THROW(bfee::initialize(sc, h, opt), bfee::ConfigError);
}

// ---------------------------------------------------------------------------
// Outer loop

TEST(Iterate, SingleIterationAddsOneRecord) {
  const auto sc = scenario_with_rate(72.14);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 1);
  SolverOptions opt;
  opt.max_iters = 1;
  const auto s = bfee::run(sc, h, opt);
  ASSERT_EQ(s.trace.size(), 2u);
  EXPECT_EQ(s.iteration, 1);
  EXPECT_EQ(s.trace.back().solver_status, "optimal");
}

class RunProperties : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(RunProperties, EveryIterateSatisfiesTheInvariants) {
  const auto sc = scenario_with_rate(72.14);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, GetParam());
  SolverOptions opt;
  opt.max_iters = 15;
  const auto s = bfee::run(sc, h, opt);
  ASSERT_NE(s.termination, bfee::Termination::kSolverFailure) << s.message;
  ASSERT_GE(s.trace.size(), 2u);
  for (std::size_t i = 1; i < s.trace.size(); ++i) {
    const auto& prev = s.trace[i - 1];
    const auto& rec = s.trace[i];
    EXPECT_GE(rec.ee_bits_per_joule, prev.ee_bits_per_joule * (1.0 - 1e-6)) << "iteration " << i;
    EXPECT_LE(rec.max_bs_power_ratio, 1.0 + 1e-6);
    EXPECT_GE(rec.min_common_rate_ratio, 1.0 - 1e-6);
    EXPECT_NEAR(rec.recovered_objective, rec.scaled_objective, 1e-6 * rec.scaled_objective);
    EXPECT_LE(rec.max_mse_excess, 1e-6);
    // The true EE is at least the surrogate value reached by the solve.
    EXPECT_GE(rec.ee_bits_per_joule, rec.scaled_objective * (1.0 - 1e-6));
  }
  // Reported EE matches a fresh evaluation of the final beams.
  const auto rx = bfee::mmse_receivers(sc.topology, h, s.beams, sc.radio.noise_w);
  EXPECT_NEAR(bfee::rates(sc, h, s.beams, rx).ee_bits_per_joule, s.ee(), 1e-9 * s.ee());
}

INSTANTIATE_TEST_SUITE_P(Seeds, RunProperties, ::testing::Values(1u, 2u, 3u));

TEST(Run, SingleAntennaJointMatchesMulticastOnly) {
  const auto sc = scenario_with_rate(115.42, 1, 8);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 4);
  SolverOptions joint;
  joint.max_iters = 10;
  SolverOptions multicast = joint;
  multicast.mode = Mode::kMulticastOnly;
  const auto a = bfee::run(sc, h, joint);
  const auto b = bfee::run(sc, h, multicast);
  EXPECT_EQ(bfee::count_active_unicast_streams(a, sc, joint.stream_active_threshold), 0u);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  EXPECT_NEAR(a.ee(), b.ee(), 1e-6 * b.ee());
}

TEST(Run, MulticastOnlyKeepsPrivateBeamsAtZero) {
  const auto sc = scenario_with_rate(72.14);
  const auto h = bfee::generate_channels(sc.topology, sc.radio, 5);
  SolverOptions opt;
  opt.mode = Mode::kMulticastOnly;
  opt.max_iters = 5;
  const auto s = bfee::run(sc, h, opt);
  for (const auto& per_user : s.beams.private_beams) {
    for (const auto& w : per_user) EXPECT_EQ(w.squaredNorm(), 0.0);
  }
}

}  // namespace
