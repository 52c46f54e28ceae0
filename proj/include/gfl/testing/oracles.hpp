// Copyright 2026 The GFL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Slow, obviously-correct reference implementations used by the test suite
// and by `gfl verify`.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "gfl/filter.hpp"
#include "gfl/graph.hpp"
#include "gfl/learner.hpp"
#include "gfl/optimizer.hpp"
#include "gfl/sysmodel.hpp"

namespace gfl::testing {

struct GridPoint {
  bool feasible = false;
  int alpha = 0;
  double q = 0.0;
  double z = 0.0;
  double objective = -1.0;
};

// Exhaustive search of one device's schedule over alpha in [alpha_min,
// alpha_max] and q, z on a uniform grid (plus the endpoint 1). For fixed
// (alpha, q) the cost grows with the sparse payload, so the largest feasible
// sparse z is found by bisection; z = 1 is checked on its own.
inline GridPoint grid_oracle(const DeviceSpec& spec, std::size_t dataset_size,
                             std::int64_t parameter_count, const ScheduleBounds& bounds,
                             double n0_dbm_per_hz, double deadline, double step = 1e-3) {
  auto grid = [&](double lo) {
    std::vector<double> g;
    for (long i = 0;; ++i) {
      const double v = lo + static_cast<double>(i) * step;
      if (v >= 1.0 - 1e-12) break;
      g.push_back(v);
    }
    g.push_back(1.0);
    return g;
  };
  const auto qs = grid(bounds.q_min);
  const auto zs = grid(bounds.z_min);
  GridPoint best;
  auto fits = [&](int alpha, double n, double payload) {
    const RoundCosts rc = round_costs(spec, alpha, n, payload, n0_dbm_per_hz);
    return rc.tau_total <= deadline && rc.energy() <= spec.e_max;
  };
  auto offer = [&](int alpha, double q, double z, double payload) {
    const double obj = schedule_objective(bounds, parameter_count, alpha, q, payload);
    if (!best.feasible || obj > best.objective) best = {true, alpha, q, z, obj};
  };
  for (int alpha = bounds.alpha_min; alpha <= bounds.alpha_max; ++alpha) {
    for (double q : qs) {
      const auto n = static_cast<double>(fraction_to_count(q, dataset_size));
      if (fits(alpha, n, payload_size(parameter_count, 1.0))) {
        offer(alpha, q, 1.0, payload_size(parameter_count, 1.0));
      }
      // Sparse grid points: zs[0 .. zs.size() - 2].
      std::size_t lo = 0;
      std::size_t hi = zs.size() - 1;  // exclusive
      if (hi == 0 || !fits(alpha, n, payload_size(parameter_count, zs[0]))) continue;
      while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (fits(alpha, n, payload_size(parameter_count, zs[mid]))) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      offer(alpha, q, zs[lo], payload_size(parameter_count, zs[lo]));
    }
  }
  return best;
}

// Limit of the filter for mu_s -> infinity: every device receives the
// kappa-weighted sum of its component's gradients divided by the component
// size.
inline Matrix component_mean_oracle(const Graph& graph, const Vector& kappa, const Matrix& g) {
  Matrix out = Matrix::Zero(g.rows(), g.cols());
  for (const auto& comp : connected_components(graph)) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(g.cols());
    for (int i : comp) sum += kappa(i) * g.row(i);
    sum /= static_cast<double>(comp.size());
    for (int i : comp) out.row(i) = sum;
  }
  return out;
}

// Central differences of the mean loss along every coordinate.
inline Eigen::VectorXd numeric_gradient(const Mlp& model, const Eigen::VectorXd& w,
                                        const Eigen::MatrixXd& x, std::span<const int> y,
                                        double h = 1e-6) {
  Eigen::VectorXd g(w.size());
  Eigen::VectorXd probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    probe(i) = w(i) + h;
    const double up = model.loss_and_gradient(probe, x, y).loss;
    probe(i) = w(i) - h;
    const double down = model.loss_and_gradient(probe, x, y).loss;
    probe(i) = w(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace gfl::testing
