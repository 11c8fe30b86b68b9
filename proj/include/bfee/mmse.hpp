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

#pragma once

#include <Eigen/Dense>

#include "bfee/error.hpp"
#include "bfee/metrics.hpp"
#include "bfee/scenario.hpp"

namespace bfee {

/// Total receive covariance at user k, desired streams included:
/// sum over all beams of H w w^H H^H, plus N0 I.
inline Eigen::MatrixXcd receive_covariance(const Topology& topo, const ChannelSet& h,
                                           const BeamformerSet& w, double noise_w,
                                           std::size_t k) {
  const auto m = static_cast<Eigen::Index>(topo.rx_antennas[k]);
  Eigen::MatrixXcd cov = noise_w * Eigen::MatrixXcd::Identity(m, m);
  for (std::size_t i = 0; i < topo.num_users(); ++i) {
    const auto& hk = h(topo.user_bs[i], k);
    for (const auto& beam : w.private_beams[i]) {
      const Eigen::VectorXcd y = hk * beam;
      cov.noalias() += y * y.adjoint();
    }
  }
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    const Eigen::VectorXcd y = h(topo.group_bs[g], k) * w.common_beams[g];
    cov.noalias() += y * y.adjoint();
  }
  return cov;
}

/// Reciprocal condition estimate below which a covariance solve is refused.
inline constexpr double kMinCovarianceRcond = 1e-13;

/// u = C_k^{-1} H_{b_k,k} w for every stream, one Cholesky factor per user.
inline ReceiverSet mmse_receivers(const Topology& topo, const ChannelSet& h,
                                  const BeamformerSet& w, double noise_w) {
  if (!(noise_w > 0.0)) throw ConfigError("mmse: noise power must be positive");
  w.validate(topo);
  ReceiverSet u;
  u.private_rx.resize(topo.num_users());
  u.common_rx.resize(topo.num_users());
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    const Eigen::LLT<Eigen::MatrixXcd> chol(receive_covariance(topo, h, w, noise_w, k));
    if (chol.info() != Eigen::Success || !(chol.rcond() > kMinCovarianceRcond)) {
      throw SolverError("mmse: receive covariance of user " + std::to_string(k) +
                        " is numerically singular");
    }
    const auto& own = h(topo.user_bs[k], k);
    for (const auto& beam : w.private_beams[k]) u.private_rx[k].push_back(chol.solve(own * beam));
    u.common_rx[k] = chol.solve(own * w.common_beams[topo.user_group[k]]);
  }
  return u;
}

}  // namespace bfee
