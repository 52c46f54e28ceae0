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

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gfl/errors.hpp"
#include "gfl/pool.hpp"
#include "gfl/sysmodel.hpp"

namespace gfl {

// Top-k sparsified gradient; indices ascending.
struct SparseGradient {
  Eigen::Index size = 0;
  std::vector<Eigen::Index> indices;
  std::vector<double> values;

  Eigen::VectorXd densify() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(size);
    for (std::size_t i = 0; i < indices.size(); ++i) out(indices[i]) = values[i];
    return out;
  }
};

// Keeps the ceil(z * B) largest-magnitude entries; equal magnitudes go to the
// lower index.
inline SparseGradient sparsify(const Eigen::VectorXd& g, double z) {
  SparseGradient out;
  out.size = g.size();
  if (g.size() == 0) return out;
  const auto keep = static_cast<std::size_t>(kept_entries(g.size(), z));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(g.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (keep < order.size()) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       const double ma = std::abs(g(a));
                       const double mb = std::abs(g(b));
                       return ma > mb || (ma == mb && a < b);
                     });
    order.resize(keep);
    std::sort(order.begin(), order.end());
  }
  out.indices = std::move(order);
  out.values.reserve(out.indices.size());
  for (Eigen::Index i : out.indices) out.values.push_back(g(i));
  return out;
}

struct ScheduleBounds {
  int alpha_min = 1;
  int alpha_max = 5;
  double q_min = 0.3;
  double z_min = 0.1;
  double mu1 = 0.4;
  double mu2 = 0.4;
  double mu3 = 0.2;

  void validate() const {
    if (alpha_min < 1 || alpha_min > alpha_max) {
      throw InputError("alpha bounds must satisfy 1 <= alpha_min <= alpha_max");
    }
    if (!(q_min > 0.0) || q_min > 1.0) throw InputError("q_min must lie in (0, 1]");
    if (!(z_min > 0.0) || z_min > 1.0) throw InputError("z_min must lie in (0, 1]");
    if (mu1 < 0.0 || mu2 < 0.0 || mu3 < 0.0) throw InputError("objective weights must be >= 0");
    if (std::abs(mu1 + mu2 + mu3 - 1.0) > 1e-9) {
      throw InputError("objective weights mu1 + mu2 + mu3 must equal 1");
    }
  }

  friend bool operator==(const ScheduleBounds&, const ScheduleBounds&) = default;
};

struct DevicePlan {
  int alpha = 1;
  double q = 1.0;
  double z = 1.0;
  std::size_t n_samples = 0;
  double payload_bits = 0.0;
  double predicted_tau = 0.0;
  double predicted_energy = 0.0;
  double objective = 0.0;
};

struct RoundPlan {
  double t_opt = 0.0;
  std::vector<DevicePlan> devices;
};

// mu1 alpha / alpha_max + mu2 q / q_max + mu3 chi / chi_max, q_max = 1 and
// chi_max the dense payload.
inline double schedule_objective(const ScheduleBounds& bounds, std::int64_t parameter_count,
                                 int alpha, double q, double payload_bits) {
  return bounds.mu1 * alpha / bounds.alpha_max + bounds.mu2 * q +
         bounds.mu3 * payload_bits / payload_size(parameter_count, 1.0);
}

// Latency with every knob at its lower bound.
inline double lower_bound_latency(const DeviceSpec& spec, std::size_t dataset_size,
                                  std::int64_t parameter_count, const ScheduleBounds& bounds,
                                  double n0_dbm_per_hz) {
  const auto n = static_cast<double>(fraction_to_count(bounds.q_min, dataset_size));
  return round_costs(spec, bounds.alpha_min, n, payload_size(parameter_count, bounds.z_min),
                     n0_dbm_per_hz)
      .tau_total;
}

// Round deadline: the slowest device's lower-bound latency.
inline double compute_t_opt(std::span<const DeviceSpec> specs,
                            std::span<const std::size_t> dataset_sizes,
                            std::int64_t parameter_count, const ScheduleBounds& bounds,
                            double n0_dbm_per_hz) {
  bounds.validate();
  if (specs.empty() || specs.size() != dataset_sizes.size()) {
    throw InputError("need one dataset size per device");
  }
  double t = 0.0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    t = std::max(t, lower_bound_latency(specs[i], dataset_sizes[i], parameter_count, bounds,
                                        n0_dbm_per_hz));
  }
  return t;
}

namespace detail {

// a0 * x0 + a1 * x1 <= rhs
struct HalfPlane {
  double a0 = 0.0;
  double a1 = 0.0;
  double rhs = 0.0;
};

// Maximizes c . x over a bounded polygon by enumerating pairwise
// intersections of its edges. Returns nothing when the polygon is empty.
inline std::optional<std::array<double, 2>> maximize_2d(std::array<double, 2> c,
                                                        std::span<const HalfPlane> planes) {
  std::optional<std::array<double, 2>> best;
  double best_value = 0.0;
  auto feasible = [&](const std::array<double, 2>& x) {
    for (const auto& h : planes) {
      const double lhs = h.a0 * x[0] + h.a1 * x[1];
      const double scale = std::abs(h.a0 * x[0]) + std::abs(h.a1 * x[1]) + std::abs(h.rhs);
      if (lhs > h.rhs + 1e-12 * scale) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < planes.size(); ++i) {
    for (std::size_t j = i + 1; j < planes.size(); ++j) {
      const auto& p = planes[i];
      const auto& q = planes[j];
      const double det = p.a0 * q.a1 - p.a1 * q.a0;
      const double norm = (std::abs(p.a0) + std::abs(p.a1)) * (std::abs(q.a0) + std::abs(q.a1));
      if (std::abs(det) <= 1e-14 * norm) continue;
      const std::array<double, 2> x{(p.rhs * q.a1 - p.a1 * q.rhs) / det,
                                    (p.a0 * q.rhs - p.rhs * q.a0) / det};
      if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !feasible(x)) continue;
      const double value = c[0] * x[0] + c[1] * x[1];
      if (!best || value > best_value) {
        best = x;
        best_value = value;
      }
    }
  }
  return best;
}

// floor(x) clamped to hi; lo - 1 when x is below lo. The slack absorbs
// rounding in budgets that land exactly on an integer; callers recheck with
// the exact cost model.
inline double floor_count(double x, double lo, double hi) {
  if (!(x >= lo - 1e-9 * std::max(1.0, std::abs(lo)))) return lo - 1.0;
  const double capped = std::min(x, hi);
  return std::clamp(std::floor(capped + 1e-9 * std::max(1.0, std::abs(capped))), lo, hi);
}

}  // namespace detail

// Best (alpha, q, z) for one device given the round deadline. For each alpha
// the latency and energy constraints are linear in the sample count n and the
// payload, so the relaxed problem is a two-variable LP; its vertex solution is
// then rounded down to whole samples and whole (index, value) pairs and
// re-checked with the exact cost model.
inline std::optional<DevicePlan> solve_device(const DeviceSpec& spec, std::size_t dataset_size,
                                              std::int64_t parameter_count,
                                              const ScheduleBounds& bounds, double n0_dbm_per_hz,
                                              double deadline) {
  bounds.validate();
  spec.validate();
  const double rate = tran_rate(spec, n0_dbm_per_hz);
  const auto d = static_cast<double>(dataset_size);
  const auto n_lo = static_cast<double>(fraction_to_count(bounds.q_min, dataset_size));
  const double n_hi = d;
  const double pair_bits = kValueBits + kIndexBits;
  const double dense_bits = payload_size(parameter_count, 1.0);

  struct Branch {
    bool dense;
    double k_lo;
    double k_hi;
  };
  std::vector<Branch> branches;
  if (bounds.z_min < 1.0) {
    const auto k_lo = static_cast<double>(kept_entries(parameter_count, bounds.z_min));
    const auto k_hi = static_cast<double>(parameter_count - 1);
    if (k_lo <= k_hi) branches.push_back({false, k_lo, k_hi});
  }
  branches.push_back({true, 0.0, 0.0});

  std::optional<DevicePlan> best;
  auto consider = [&](int alpha, double n, double payload, double z) {
    if (n < n_lo || n > n_hi) return;
    const RoundCosts rc = round_costs(spec, alpha, n, payload, n0_dbm_per_hz);
    if (rc.tau_total > deadline || rc.energy() > spec.e_max) return;
    DevicePlan plan;
    plan.alpha = alpha;
    plan.n_samples = static_cast<std::size_t>(n);
    plan.q = n / d;
    plan.z = z;
    plan.payload_bits = payload;
    plan.predicted_tau = rc.tau_total;
    plan.predicted_energy = rc.energy();
    plan.objective = schedule_objective(bounds, parameter_count, alpha, plan.q, payload);
    if (!best || plan.objective > best->objective) best = plan;
  };

  for (int alpha = bounds.alpha_min; alpha <= bounds.alpha_max; ++alpha) {
    const double c_time = comp_delay(spec, alpha, 1.0);
    const double c_energy = comp_energy(spec, alpha, 1.0);
    for (const Branch& br : branches) {
      // Variables: x0 = samples, x1 = payload bits.
      const double p_lo = br.dense ? dense_bits : pair_bits * br.k_lo;
      const double p_hi = br.dense ? dense_bits : pair_bits * br.k_hi;
      const detail::HalfPlane planes[] = {
          {-1.0, 0.0, -n_lo},
          {1.0, 0.0, n_hi},
          {0.0, -1.0, -p_lo},
          {0.0, 1.0, p_hi},
          {c_time, 1.0 / rate, deadline},
          {c_energy, spec.p_tran / rate, spec.e_max},
      };
      const std::array<double, 2> gain{bounds.mu2 / d, bounds.mu3 / dense_bits};
      const auto relaxed = detail::maximize_2d(gain, planes);
      if (!relaxed) continue;

      auto payload_of = [&](double k) { return br.dense ? dense_bits : pair_bits * k; };
      auto z_of = [&](double k) {
        return br.dense ? 1.0 : k / static_cast<double>(parameter_count);
      };

      // Round the sample count down, then spend what is left on payload.
      double n = detail::floor_count((*relaxed)[0], n_lo, n_hi);
      if (br.dense) {
        for (int step = 0; step < 4 && n >= n_lo; ++step, n -= 1.0) {
          const RoundCosts rc = round_costs(spec, alpha, n, dense_bits, n0_dbm_per_hz);
          if (rc.tau_total <= deadline && rc.energy() <= spec.e_max) {
            consider(alpha, n, dense_bits, 1.0);
            break;
          }
        }
        continue;
      }
      if (n >= n_lo) {
        const double by_time = (deadline - c_time * n) * rate / pair_bits;
        const double by_energy = (spec.e_max - c_energy * n) * rate / (spec.p_tran * pair_bits);
        double k = detail::floor_count(std::min(by_time, by_energy), br.k_lo, br.k_hi);
        for (int step = 0; step < 4 && k >= br.k_lo; ++step, k -= 1.0) {
          const RoundCosts rc = round_costs(spec, alpha, n, payload_of(k), n0_dbm_per_hz);
          if (rc.tau_total <= deadline && rc.energy() <= spec.e_max) {
            consider(alpha, n, payload_of(k), z_of(k));
            break;
          }
        }
      }
      // Or round the payload down and spend what is left on samples.
      double k = detail::floor_count((*relaxed)[1] / pair_bits, br.k_lo, br.k_hi);
      if (k >= br.k_lo) {
        const double payload = payload_of(k);
        const double by_time = (deadline - payload / rate) / c_time;
        const double by_energy = (spec.e_max - spec.p_tran * payload / rate) / c_energy;
        double m = detail::floor_count(std::min(by_time, by_energy), n_lo, n_hi);
        for (int step = 0; step < 4 && m >= n_lo; ++step, m -= 1.0) {
          const RoundCosts rc = round_costs(spec, alpha, m, payload, n0_dbm_per_hz);
          if (rc.tau_total <= deadline && rc.energy() <= spec.e_max) {
            consider(alpha, m, payload, z_of(k));
            break;
          }
        }
      }
    }
  }
  return best;
}

// Deadline from the slowest device, then each device's best knobs under it.
inline RoundPlan solve_round_plan(std::span<const DeviceSpec> specs,
                                  std::span<const std::size_t> dataset_sizes,
                                  std::int64_t parameter_count, const ScheduleBounds& bounds,
                                  double n0_dbm_per_hz) {
  RoundPlan plan;
  plan.t_opt = compute_t_opt(specs, dataset_sizes, parameter_count, bounds, n0_dbm_per_hz);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto device = solve_device(specs[i], dataset_sizes[i], parameter_count, bounds,
                               n0_dbm_per_hz, plan.t_opt);
    if (!device) {
      const auto n = static_cast<double>(fraction_to_count(bounds.q_min, dataset_sizes[i]));
      const RoundCosts rc =
          round_costs(specs[i], bounds.alpha_min, n,
                      payload_size(parameter_count, bounds.z_min), n0_dbm_per_hz);
      std::ostringstream os;
      os << "device " << i << " is infeasible at the lower corner: ";
      if (rc.energy() > specs[i].e_max) {
        os << "energy " << rc.energy() << " J exceeds E_max " << specs[i].e_max << " J";
      } else {
        os << "latency " << rc.tau_total << " s exceeds T_opt " << plan.t_opt << " s";
      }
      throw SolverError(os.str());
    }
    plan.devices.push_back(*device);
  }
  return plan;
}

}  // namespace gfl
