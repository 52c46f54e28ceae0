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

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>

#include "gfl/errors.hpp"
#include "gfl/graph.hpp"

namespace gfl {

// Low-pass graph filter h(lambda) = 1 / (1 + mu_s * lambda).
struct FilterSpec {
  double mu_s = 0.0;

  void validate() const {
    if (!std::isfinite(mu_s) || mu_s < 0.0) {
      throw InputError("filter parameter mu_s must be finite and nonnegative");
    }
  }
};

inline double filter_response(const FilterSpec& spec, double lambda) {
  spec.validate();
  if (!(lambda >= 0.0)) throw InputError("graph frequency must be nonnegative");
  return 1.0 / (1.0 + spec.mu_s * lambda);
}

// Spectral operator H = V h(Lambda) V^T. Eigenvalues within round-off of zero
// are snapped to exactly zero before evaluating h; otherwise a huge mu_s
// turns a 1e-16 residue into a visible loss of the DC component.
inline Matrix build_filter_matrix(const Spectrum& spectrum, const FilterSpec& spec) {
  spec.validate();
  const Eigen::Index k = spectrum.size();
  if (spectrum.eigenvectors.rows() != k || spectrum.eigenvectors.cols() != k) {
    throw InputError("spectrum eigenvector matrix must be K x K");
  }
  if (spec.mu_s == 0.0) {
    // h == 1 and V orthonormal: the exact identity, not V V^T rounded.
    return Matrix::Identity(k, k);
  }
  const double zero_tol = 1e-10 * std::max(1.0, spectrum.eigenvalues.cwiseAbs().maxCoeff());
  Vector response(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double lambda = spectrum.eigenvalues(i);
    response(i) = filter_response(spec, lambda <= zero_tol ? 0.0 : lambda);
  }
  const Matrix& v = spectrum.eigenvectors;
  Matrix h = v * response.asDiagonal() * v.transpose();
  return 0.5 * (h + h.transpose());
}

// Per-device aggregation weights. Stored scaled so that they sum to K: with an
// orthonormal DC eigenvector 1/sqrt(K), the infinite-mu_s filter then returns
// exactly the data-size weighted mean.
struct AggregationWeights {
  Vector kappa;

  static AggregationWeights uniform(Eigen::Index k) {
    return {Vector::Ones(k)};
  }

  static AggregationWeights from_dataset_sizes(std::span<const std::size_t> sizes) {
    if (sizes.empty()) throw InputError("need at least one dataset size");
    const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
    if (!(total > 0.0)) throw InputError("total dataset size must be positive");
    const auto k = static_cast<Eigen::Index>(sizes.size());
    AggregationWeights w{Vector(k)};
    for (Eigen::Index i = 0; i < k; ++i) {
      w.kappa(i) = static_cast<double>(k) * static_cast<double>(sizes[i]) / total;
    }
    return w;
  }

  Eigen::Index size() const { return kappa.size(); }

  void validate() const {
    if (kappa.size() == 0) throw InputError("aggregation weights are empty");
    for (Eigen::Index i = 0; i < kappa.size(); ++i) {
      if (!std::isfinite(kappa(i)) || kappa(i) < 0.0) {
        throw InputError("aggregation weights must be finite and nonnegative");
      }
    }
    const double k = static_cast<double>(kappa.size());
    if (std::abs(kappa.sum() - k) > 1e-9 * k) {
      throw InputError("aggregation weights must sum to K");
    }
  }

  // kappa / K, the FedAvg weights.
  Vector normalized() const { return kappa / static_cast<double>(kappa.size()); }
};

namespace detail {

inline void check_finite_rows(const Matrix& g) {
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    if (!g.row(i).allFinite()) {
      std::ostringstream os;
      os << "gradient of device " << i << " has non-finite entries";
      throw InputError(os.str());
    }
  }
}

}  // namespace detail

// G_hat = H diag(kappa) G. Row i is the update broadcast to device i.
inline Matrix aggregate(const Matrix& h, const AggregationWeights& weights,
                        const Matrix& gradients) {
  weights.validate();
  if (h.rows() != h.cols() || h.rows() != weights.size() ||
      gradients.rows() != weights.size()) {
    throw InputError("filter, weights and gradient matrix disagree on K");
  }
  detail::check_finite_rows(gradients);
  return h * (weights.kappa.asDiagonal() * gradients);
}

// Baseline aggregator: sum_i w_i g_i with weights summing to one.
inline Vector fedavg(const Vector& weights, const Matrix& gradients) {
  if (weights.size() != gradients.rows()) {
    throw InputError("weights and gradient matrix disagree on K");
  }
  if (!weights.allFinite() || std::abs(weights.sum() - 1.0) > 1e-9) {
    throw InputError("FedAvg weights must sum to 1");
  }
  detail::check_finite_rows(gradients);
  return gradients.transpose() * weights;
}

// Keeps H for one spectrum and rebuilds it only when mu_s changes.
class FilterCache {
 public:
  explicit FilterCache(Spectrum spectrum) : spectrum_(std::move(spectrum)) {}

  const Matrix& matrix(const FilterSpec& spec) {
    if (!cached_mu_ || *cached_mu_ != spec.mu_s) {
      h_ = build_filter_matrix(spectrum_, spec);
      cached_mu_ = spec.mu_s;
    }
    return h_;
  }

  const Spectrum& spectrum() const { return spectrum_; }

 private:
  Spectrum spectrum_;
  std::optional<double> cached_mu_;
  Matrix h_;
};

}  // namespace gfl
