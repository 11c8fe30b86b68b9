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

// Exact link-level evaluation of a (transmit beams, receive filters) pair:
// interference, SINR, MSE, rates, power consumption and energy efficiency.
// Everything the optimizer reports is recomputed through these functions.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bfee/error.hpp"
#include "bfee/scenario.hpp"

namespace bfee {

/// Private beams w_{k,l} and common beams w~_{g,c}.
struct BeamformerSet {
  std::vector<std::vector<Eigen::VectorXcd>> private_beams;  // [k][l], length N_{b_k}
  std::vector<Eigen::VectorXcd> common_beams;                // [g],    length N_{b_g}

  static BeamformerSet zeros(const Topology& topo) {
    BeamformerSet w;
    w.private_beams.resize(topo.num_users());
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      const auto n = static_cast<Eigen::Index>(topo.bs_antennas[topo.user_bs[k]]);
      w.private_beams[k].assign(topo.private_streams(k), Eigen::VectorXcd::Zero(n));
    }
    for (std::size_t g = 0; g < topo.num_groups(); ++g) {
      w.common_beams.push_back(
          Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(topo.bs_antennas[topo.group_bs[g]])));
    }
    return w;
  }

  void validate(const Topology& topo) const {
    if (private_beams.size() != topo.num_users() || common_beams.size() != topo.num_groups()) {
      throw ShapeError("beams: wrong number of users or groups");
    }
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      if (private_beams[k].size() != topo.private_streams(k)) {
        throw ShapeError("beams: user " + std::to_string(k) + " needs M_k - 1 private beams");
      }
      for (const auto& w : private_beams[k]) {
        if (static_cast<std::size_t>(w.size()) != topo.bs_antennas[topo.user_bs[k]] ||
            !w.allFinite()) {
          throw ShapeError("beams: private beam of user " + std::to_string(k) + " malformed");
        }
      }
    }
    for (std::size_t g = 0; g < topo.num_groups(); ++g) {
      if (static_cast<std::size_t>(common_beams[g].size()) != topo.bs_antennas[topo.group_bs[g]] ||
          !common_beams[g].allFinite()) {
        throw ShapeError("beams: common beam of group " + std::to_string(g) + " malformed");
      }
    }
  }

  /// ||w||^2 summed over the streams of BS b.
  double bs_power(const Topology& topo, std::size_t b) const {
    double p = 0.0;
    for (auto k : topo.bs_users[b]) {
      for (const auto& w : private_beams[k]) p += w.squaredNorm();
    }
    for (auto g : topo.bs_groups[b]) p += common_beams[g].squaredNorm();
    return p;
  }

  double transmit_power() const {
    double p = 0.0;
    for (const auto& per_user : private_beams) {
      for (const auto& w : per_user) p += w.squaredNorm();
    }
    for (const auto& w : common_beams) p += w.squaredNorm();
    return p;
  }
};

/// Receive filters u_{k,l} and u_{k,c}, all of length M_k.
struct ReceiverSet {
  std::vector<std::vector<Eigen::VectorXcd>> private_rx;  // [k][l]
  std::vector<Eigen::VectorXcd> common_rx;                // [k]

  void validate(const Topology& topo) const {
    if (private_rx.size() != topo.num_users() || common_rx.size() != topo.num_users()) {
      throw ShapeError("receivers: wrong number of users");
    }
    for (std::size_t k = 0; k < topo.num_users(); ++k) {
      const auto m = topo.rx_antennas[k];
      if (private_rx[k].size() != topo.private_streams(k)) {
        throw ShapeError("receivers: user " + std::to_string(k) + " needs M_k - 1 private filters");
      }
      for (const auto& u : private_rx[k]) {
        if (static_cast<std::size_t>(u.size()) != m) throw ShapeError("receivers: length != M_k");
      }
      if (static_cast<std::size_t>(common_rx[k].size()) != m) {
        throw ShapeError("receivers: length != M_k");
      }
    }
  }
};

struct RateReport {
  std::vector<std::vector<double>> private_rate_bps;  // [k][l]
  std::vector<double> common_sinr;                    // [k]
  std::vector<double> group_rate_bps;                 // [g]
  double sum_rate_bps = 0.0;
  double total_power_w = 0.0;
  double ee_bits_per_joule = 0.0;
};

/// Link quantities for one receive filter: u^H H_{b_i,k} w for every stream.
namespace detail {

inline Complex gain(const Eigen::VectorXcd& u, const Eigen::MatrixXcd& h, const Eigen::VectorXcd& w) {
  return u.dot(h * w);  // Eigen's dot conjugates the left operand
}

/// Sum of |u^H H w|^2 over all streams, optionally skipping one private
/// stream (skip_user, skip_stream) or one common beam (skip_group).
inline double received_power(const Topology& topo, const ChannelSet& h, const BeamformerSet& w,
                             std::size_t k, const Eigen::VectorXcd& u, std::size_t skip_user,
                             std::size_t skip_stream, std::size_t skip_group) {
  // Precompute u^H H_{b,k} per BS.
  std::vector<Eigen::RowVectorXcd> uh(topo.num_bs());
  for (std::size_t b = 0; b < topo.num_bs(); ++b) uh[b] = u.adjoint() * h(b, k);
  double acc = 0.0;
  for (std::size_t i = 0; i < topo.num_users(); ++i) {
    const auto& row = uh[topo.user_bs[i]];
    for (std::size_t j = 0; j < w.private_beams[i].size(); ++j) {
      if (i == skip_user && j == skip_stream) continue;
      acc += std::norm((row * w.private_beams[i][j])(0));
    }
  }
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    if (g == skip_group) continue;
    acc += std::norm((uh[topo.group_bs[g]] * w.common_beams[g])(0));
  }
  return acc;
}

constexpr auto kNone = static_cast<std::size_t>(-1);

}  // namespace detail

/// I_{k,l}: every other private stream plus every common beam.
inline double interference_private(const Topology& topo, const ChannelSet& h,
                                   const BeamformerSet& w, const ReceiverSet& u, std::size_t k,
                                   std::size_t l) {
  return detail::received_power(topo, h, w, k, u.private_rx[k][l], k, l, detail::kNone);
}

/// I_{k,c}: every private stream plus the common beams of other groups.
inline double interference_common(const Topology& topo, const ChannelSet& h,
                                  const BeamformerSet& w, const ReceiverSet& u, std::size_t k) {
  return detail::received_power(topo, h, w, k, u.common_rx[k], detail::kNone, detail::kNone,
                                topo.user_group[k]);
}

inline double sinr_private(const Topology& topo, const ChannelSet& h, const BeamformerSet& w,
                           const ReceiverSet& u, double noise_w, std::size_t k, std::size_t l) {
  const auto& rx = u.private_rx[k][l];
  const double signal = std::norm(detail::gain(rx, h(topo.user_bs[k], k), w.private_beams[k][l]));
  const double denom = rx.squaredNorm() * noise_w + interference_private(topo, h, w, u, k, l);
  return denom > 0.0 ? signal / denom : 0.0;
}

inline double sinr_common(const Topology& topo, const ChannelSet& h, const BeamformerSet& w,
                          const ReceiverSet& u, double noise_w, std::size_t k) {
  const auto& rx = u.common_rx[k];
  const double signal =
      std::norm(detail::gain(rx, h(topo.user_bs[k], k), w.common_beams[topo.user_group[k]]));
  const double denom = rx.squaredNorm() * noise_w + interference_common(topo, h, w, u, k);
  return denom > 0.0 ? signal / denom : 0.0;
}

/// |1 - u^H H w|^2 + I + N0 ||u||^2
inline double mse_private(const Topology& topo, const ChannelSet& h, const BeamformerSet& w,
                          const ReceiverSet& u, double noise_w, std::size_t k, std::size_t l) {
  const auto& rx = u.private_rx[k][l];
  const Complex g = detail::gain(rx, h(topo.user_bs[k], k), w.private_beams[k][l]);
  return std::norm(1.0 - g) + interference_private(topo, h, w, u, k, l) +
         noise_w * rx.squaredNorm();
}

inline double mse_common(const Topology& topo, const ChannelSet& h, const BeamformerSet& w,
                         const ReceiverSet& u, double noise_w, std::size_t k) {
  const auto& rx = u.common_rx[k];
  const Complex g = detail::gain(rx, h(topo.user_bs[k], k), w.common_beams[topo.user_group[k]]);
  return std::norm(1.0 - g) + interference_common(topo, h, w, u, k) + noise_w * rx.squaredNorm();
}

/// sum_b (P0,BS + N_b PRF,BS) + sum_k (P0,UE + M_k PRF,UE)
inline double circuit_power(const Topology& topo, const PowerModel& pm) {
  double p = 0.0;
  for (auto n : topo.bs_antennas) p += pm.p0_bs_w + static_cast<double>(n) * pm.prf_bs_w;
  for (auto m : topo.rx_antennas) p += pm.p0_ue_w + static_cast<double>(m) * pm.prf_ue_w;
  return p;
}

inline double total_power(const BeamformerSet& w, const Topology& topo, const PowerModel& pm) {
  return w.transmit_power() / pm.eta + circuit_power(topo, pm);
}

inline double energy_efficiency(double sum_rate_bps, double total_power_w) {
  return total_power_w > 0.0 ? sum_rate_bps / total_power_w : 0.0;
}

/// Rates (base-2 logarithm, bit/s), power and network EE.
inline RateReport rates(const Scenario& sc, const ChannelSet& h, const BeamformerSet& w,
                        const ReceiverSet& u) {
  const auto& topo = sc.topology;
  w.validate(topo);
  u.validate(topo);
  const double bw = sc.radio.bandwidth_hz;
  const double n0 = sc.radio.noise_w;
  RateReport rep;
  rep.private_rate_bps.resize(topo.num_users());
  rep.common_sinr.resize(topo.num_users());
  for (std::size_t k = 0; k < topo.num_users(); ++k) {
    for (std::size_t l = 0; l < topo.private_streams(k); ++l) {
      const double r = bw * std::log2(1.0 + sinr_private(topo, h, w, u, n0, k, l));
      rep.private_rate_bps[k].push_back(r);
      rep.sum_rate_bps += r;
    }
    rep.common_sinr[k] = sinr_common(topo, h, w, u, n0, k);
  }
  rep.group_rate_bps.resize(topo.num_groups());
  for (std::size_t g = 0; g < topo.num_groups(); ++g) {
    double worst = std::numeric_limits<double>::infinity();
    for (auto k : topo.group_members[g]) worst = std::min(worst, rep.common_sinr[k]);
    rep.group_rate_bps[g] = bw * std::log2(1.0 + worst);
    rep.sum_rate_bps += rep.group_rate_bps[g];
  }
  rep.total_power_w = total_power(w, topo, sc.power);
  rep.ee_bits_per_joule = energy_efficiency(rep.sum_rate_bps, rep.total_power_w);
  return rep;
}

}  // namespace bfee
