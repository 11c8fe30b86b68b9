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

// Brute-force vertex enumeration for tiny boxed LPs. Test-only.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace testing_oracle {

struct SmallLp {
  std::vector<double> c;                 // maximize c^T x
  std::vector<std::vector<double>> a;    // a x <= b
  std::vector<double> b;
  double box = 10.0;                     // -box <= x_j <= box
};

inline SmallLp random_lp(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.1, 2.0);
  SmallLp lp;
  lp.c.resize(static_cast<std::size_t>(n));
  for (auto& v : lp.c) v = gauss(rng);
  const int m = n + 2;
  std::vector<double> center(static_cast<std::size_t>(n));
  for (auto& v : center) v = gauss(rng);
  for (int i = 0; i < m; ++i) {
    std::vector<double> row(static_cast<std::size_t>(n));
    double at = 0.0;
    for (int j = 0; j < n; ++j) {
      row[static_cast<std::size_t>(j)] = gauss(rng);
      at += row[static_cast<std::size_t>(j)] * center[static_cast<std::size_t>(j)];
    }
    lp.a.push_back(row);
    lp.b.push_back(at + unit(rng));
  }
  return lp;
}

/// Best objective over all basic feasible points (box rows included).
inline double enumerate_vertices(const SmallLp& lp) {
  const int n = static_cast<int>(lp.c.size());
  std::vector<std::vector<double>> rows = lp.a;
  std::vector<double> rhs = lp.b;
  for (int j = 0; j < n; ++j) {
    std::vector<double> up(static_cast<std::size_t>(n), 0.0), lo(static_cast<std::size_t>(n), 0.0);
    up[static_cast<std::size_t>(j)] = 1.0;
    lo[static_cast<std::size_t>(j)] = -1.0;
    rows.push_back(up);
    rhs.push_back(lp.box);
    rows.push_back(lo);
    rhs.push_back(lp.box);
  }
  const int m = static_cast<int>(rows.size());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(n));
  // Iterate over all n-subsets of the m rows.
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Eigen::MatrixXd a(n, n);
      Eigen::VectorXd b(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = rows[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])][static_cast<std::size_t>(j)];
        b(i) = rhs[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      if (lu.rank() < n) return;
      const Eigen::VectorXd x = lu.solve(b);
      for (int i = 0; i < m; ++i) {
        double v = 0.0;
        for (int j = 0; j < n; ++j) v += rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * x(j);
        if (v > rhs[static_cast<std::size_t>(i)] + 1e-9) return;
      }
      double obj = 0.0;
      for (int j = 0; j < n; ++j) obj += lp.c[static_cast<std::size_t>(j)] * x(j);
      best = std::max(best, obj);
      return;
    }
    for (int i = start; i < m; ++i) {
      pick[static_cast<std::size_t>(depth)] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace testing_oracle
