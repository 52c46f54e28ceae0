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

// Self-checks against the reference oracles; backs `gfl verify`.

#include <Eigen/Dense>

#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gfl/filter.hpp"
#include "gfl/graph.hpp"
#include "gfl/learner.hpp"
#include "gfl/optimizer.hpp"
#include "gfl/rng.hpp"
#include "gfl/sysmodel.hpp"
#include "gfl/testing/oracles.hpp"

namespace gfl {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Erdos-Renyi graph on k nodes.
inline Graph random_graph(int k, double p, Rng& rng) {
  std::bernoulli_distribution edge(p);
  Matrix a = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (edge(rng)) a(i, j) = a(j, i) = 1.0;
    }
  }
  return make_graph(std::move(a));
}

struct OptimizerInstance {
  std::vector<DeviceSpec> specs;
  std::vector<std::size_t> sizes;
  std::int64_t parameters = 0;
  ScheduleBounds bounds;
  double n0 = -174.0;
};

// Small two-device instance with energy budgets tight enough to bind
// sometimes. Dataset and model sizes stay >= 100 so the 1e-3 grid resolves
// single samples and single kept entries.
inline OptimizerInstance random_optimizer_instance(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  OptimizerInstance inst;
  inst.parameters = static_cast<std::int64_t>(in(100, 3000));
  for (int i = 0; i < 2; ++i) {
    DeviceSpec s;
    s.rho = in(1e4, 5e4);
    s.f = in(1e9, 3.5e9);
    s.p_tran = in(0.5, 1.0);
    s.xi_db = in(1.0, 2.0);
    s.b = 1e6;
    s.e_max = in(0.002, 0.05);
    inst.specs.push_back(s);
    inst.sizes.push_back(static_cast<std::size_t>(in(100, 600)));
  }
  inst.bounds.q_min = in(0.1, 0.5);
  inst.bounds.z_min = in(0.05, 0.4);
  const double a = in(0.0, 1.0);
  const double b = in(0.0, 1.0 - a);
  inst.bounds.mu1 = a;
  inst.bounds.mu2 = b;
  inst.bounds.mu3 = 1.0 - a - b;
  return inst;
}

struct OracleComparison {
  int instances = 0;
  int skipped = 0;  // lower corner over the energy budget
  double worst_gap = 0.0;  // max(oracle - solver)
  bool constraints_ok = true;
};

inline OracleComparison compare_optimizer_with_grid(int count, std::uint64_t seed) {
  Rng rng(seed);
  OracleComparison out;
  while (out.instances < count) {
    const auto inst = random_optimizer_instance(rng);
    RoundPlan plan;
    try {
      plan = solve_round_plan(inst.specs, inst.sizes, inst.parameters, inst.bounds, inst.n0);
    } catch (const SolverError&) {
      ++out.skipped;
      continue;
    }
    ++out.instances;
    for (std::size_t i = 0; i < inst.specs.size(); ++i) {
      const auto& d = plan.devices[i];
      if (d.predicted_tau > plan.t_opt || d.predicted_energy > inst.specs[i].e_max) {
        out.constraints_ok = false;
      }
      const auto ref = testing::grid_oracle(inst.specs[i], inst.sizes[i], inst.parameters,
                                            inst.bounds, inst.n0, plan.t_opt);
      if (ref.feasible) out.worst_gap = std::max(out.worst_gap, ref.objective - d.objective);
    }
  }
  return out;
}

struct SpectralCheck {
  double worst_residual = 0.0;     // max |LV - V Lambda|
  double worst_orthogonality = 0.0;  // max |V^T V - I|
  bool multiplicity_ok = true;
};

inline SpectralCheck check_random_spectra(int count, int max_k, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> size(2, max_k);
  std::uniform_real_distribution<double> density(0.05, 0.5);
  SpectralCheck out;
  for (int t = 0; t < count; ++t) {
    const Graph g = random_graph(size(rng), density(rng), rng);
    const Matrix l = laplacian(g);
    const Spectrum s = eigendecompose(l);
    const Matrix& v = s.eigenvectors;
    const Matrix r = l * v - v * s.eigenvalues.asDiagonal();
    const Matrix o = v.transpose() * v - Matrix::Identity(v.rows(), v.cols());
    out.worst_residual = std::max(out.worst_residual, r.cwiseAbs().maxCoeff());
    out.worst_orthogonality = std::max(out.worst_orthogonality, o.cwiseAbs().maxCoeff());
    int zeros = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) zeros += std::abs(s.eigenvalues(i)) < 1e-9;
    if (zeros != static_cast<int>(connected_components(g).size())) out.multiplicity_ok = false;
  }
  return out;
}

// Largest relative error between backprop and central differences over
// `points` random weight vectors.
inline double check_gradients(int points, std::uint64_t seed) {
  Rng rng(seed);
  ModelConfig cfg{{5, 7, 4, 3}, Activation::relu, seed};
  Mlp model(cfg);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, 2);
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    // Noise on every entry, biases included, keeps pre-activations off the
    // ReLU kink at exactly zero.
    Eigen::VectorXd w = model.init(rng);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) += 0.1 * normal(rng);
    Eigen::MatrixXd x(6, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    std::vector<int> y(6);
    for (int& v : y) v = label(rng);
    const Eigen::VectorXd analytic = model.loss_and_gradient(w, x, y).gradient;
    const Eigen::VectorXd numeric = testing::numeric_gradient(model, w, x, y);
    const double rel = (analytic - numeric).norm() / std::max(1e-12, numeric.norm());
    worst = std::max(worst, rel);
  }
  return worst;
}

inline std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::vector<CheckResult> run_verification(std::uint64_t seed) {
  std::vector<CheckResult> out;
  {
    const auto c = compare_optimizer_with_grid(50, seed);
    out.push_back({"optimizer_vs_grid", c.worst_gap <= 1e-2 && c.constraints_ok,
                   "instances=" + std::to_string(c.instances) + " worst_gap=" + fmt_g(c.worst_gap)});
  }
  {
    const auto s = check_random_spectra(20, 32, seed);
    out.push_back({"spectrum", s.worst_residual < 1e-8 && s.worst_orthogonality < 1e-8 && s.multiplicity_ok,
                   "residual=" + fmt_g(s.worst_residual) + " orthogonality=" + fmt_g(s.worst_orthogonality)});
  }
  {
    Rng rng(seed);
    const Graph g = random_graph(12, 0.2, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix grads(12, 8);
    for (Eigen::Index i = 0; i < grads.size(); ++i) grads.data()[i] = normal(rng);
    const auto kappa = AggregationWeights::uniform(12);
    const Matrix h = build_filter_matrix(eigendecompose(laplacian(g)), FilterSpec{1e12});
    const double err = (aggregate(h, kappa, grads) -
                        testing::component_mean_oracle(g, kappa.kappa, grads)).cwiseAbs().maxCoeff();
    out.push_back({"component_means", err < 1e-6, "max_error=" + fmt_g(err)});
  }
  {
    const double rel = check_gradients(5, seed);
    out.push_back({"gradients", rel < 1e-4, "relative_error=" + fmt_g(rel)});
  }
  return out;
}

}  // namespace gfl
