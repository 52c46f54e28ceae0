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
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gfl/errors.hpp"

namespace gfl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct DeviceId {
  int cluster_index = 0;
  int local_index = 0;

  friend bool operator==(const DeviceId&, const DeviceId&) = default;
};

// Undirected device topology. Adjacency is symmetric, zero on the diagonal and
// nonnegative.
struct Graph {
  Matrix adjacency;
  std::optional<Positions> positions;
  std::vector<DeviceId> device_ids;

  Eigen::Index size() const { return adjacency.rows(); }
  int num_clusters() const {
    int n = 0;
    for (const auto& id : device_ids) n = std::max(n, id.cluster_index + 1);
    return n;
  }
};

// Eigenpairs of a Laplacian, eigenvalues ascending, column i of eigenvectors
// paired with eigenvalues[i].
struct Spectrum {
  Vector eigenvalues;
  Matrix eigenvectors;

  Eigen::Index size() const { return eigenvalues.size(); }
};

namespace detail {

// Local index counts devices of the same cluster in order of appearance.
inline std::vector<DeviceId> make_device_ids(const std::vector<int>& clusters) {
  std::vector<DeviceId> ids;
  ids.reserve(clusters.size());
  std::vector<int> seen;
  for (int c : clusters) {
    if (c < 0) throw InputError("cluster index must be nonnegative");
    if (static_cast<std::size_t>(c) >= seen.size()) seen.resize(c + 1, 0);
    ids.push_back({c, seen[c]++});
  }
  return ids;
}

inline void check_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw InputError(std::string(what) + " must be square");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (m(i, j) != m(j, i)) {
        std::ostringstream os;
        os << what << " is not symmetric at (" << i << ", " << j << ")";
        throw InputError(os.str());
      }
    }
  }
}

}  // namespace detail

// Validates an explicit adjacency matrix and wraps it into a Graph. Devices
// without a cluster vector all land in cluster 0.
inline Graph make_graph(Matrix adjacency, std::vector<int> clusters = {}) {
  detail::check_symmetric(adjacency, "adjacency");
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    if (adjacency(i, i) != 0.0) throw InputError("adjacency diagonal must be zero");
    for (Eigen::Index j = 0; j < adjacency.cols(); ++j) {
      if (!std::isfinite(adjacency(i, j)) || adjacency(i, j) < 0.0) {
        throw InputError("adjacency entries must be finite and nonnegative");
      }
    }
  }
  if (clusters.empty()) clusters.assign(static_cast<std::size_t>(adjacency.rows()), 0);
  if (static_cast<Eigen::Index>(clusters.size()) != adjacency.rows()) {
    throw InputError("cluster vector length does not match adjacency");
  }
  Graph g;
  g.adjacency = std::move(adjacency);
  g.device_ids = detail::make_device_ids(clusters);
  return g;
}

// (A)_ij = 1 iff the Euclidean distance is strictly below d_max and i != j.
inline Graph build_adjacency_from_positions(const Positions& positions, double d_max,
                                            std::vector<int> clusters = {}) {
  if (!(d_max > 0.0) || !std::isfinite(d_max)) throw InputError("d_max must be positive");
  const Eigen::Index k = positions.rows();
  if (k < 1) throw InputError("need at least one device");
  if (!positions.allFinite()) throw InputError("device coordinates must be finite");

  Matrix a = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double d = (positions.row(i) - positions.row(j)).norm();
      if (d < d_max) a(i, j) = a(j, i) = 1.0;
    }
  }
  Graph g = make_graph(std::move(a), std::move(clusters));
  g.positions = positions;
  return g;
}

inline Matrix laplacian(const Matrix& adjacency) {
  detail::check_symmetric(adjacency, "adjacency");
  Matrix l = -adjacency;
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    // D_ii - A_ii; summing the off-diagonal entries directly keeps row sums
    // exactly zero.
    double degree = 0.0;
    for (Eigen::Index j = 0; j < adjacency.cols(); ++j) {
      if (j != i) degree += adjacency(i, j);
    }
    l(i, i) = degree;
  }
  return l;
}

inline Matrix laplacian(const Graph& graph) { return laplacian(graph.adjacency); }

struct JacobiOptions {
  // Off-diagonal Frobenius norm threshold, scaled by max(1, ||L||_F).
  double tolerance = 1e-12;
  int max_sweeps = 100;
};

// Cyclic Jacobi eigensolver for symmetric matrices. Eigenvalues come back
// ascending (stable on ties) and each eigenvector is flipped so that its
// largest-magnitude entry is positive.
inline Spectrum eigendecompose(const Matrix& l, const JacobiOptions& options = {}) {
  detail::check_symmetric(l, "Laplacian");
  if (!l.allFinite()) throw InputError("Laplacian has non-finite entries");
  const Eigen::Index n = l.rows();

  Matrix a = l;
  Matrix v = Matrix::Identity(n, n);
  const double threshold = options.tolerance * std::max(1.0, l.norm());

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = off_norm() < threshold;
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_norm() < threshold;
  }
  if (!converged) {
    std::ostringstream os;
    os << "Jacobi eigensolver did not converge after " << options.max_sweeps
       << " sweeps, off-diagonal residual " << off_norm();
    throw NumericalError(os.str());
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });

  Spectrum out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.eigenvalues(i) = a(src, src);
    Vector col = v.col(src);
    const double peak = col.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < n; ++k) {
      // First entry within rounding of the peak decides the sign.
      if (std::abs(col(k)) >= peak - 1e-12) {
        if (col(k) < 0.0) col = -col;
        break;
      }
    }
    out.eigenvectors.col(i) = col;
  }
  return out;
}

inline Matrix gft(const Spectrum& spectrum, const Matrix& signal) {
  if (signal.rows() != spectrum.size()) {
    throw InputError("signal row count does not match the graph size");
  }
  return spectrum.eigenvectors.transpose() * signal;
}

inline Matrix igft(const Spectrum& spectrum, const Matrix& coefficients) {
  if (coefficients.rows() != spectrum.size()) {
    throw InputError("coefficient row count does not match the graph size");
  }
  return spectrum.eigenvectors * coefficients;
}

// Components in order of their smallest member; members ascending.
inline std::vector<std::vector<int>> connected_components(const Graph& graph) {
  const int k = static_cast<int>(graph.size());
  std::vector<int> parent(static_cast<std::size_t>(k));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (graph.adjacency(i, j) != 0.0) {
        const int ri = find(i);
        const int rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  std::vector<std::vector<int>> out;
  std::vector<int> slot(static_cast<std::size_t>(k), -1);
  for (int i = 0; i < k; ++i) {
    const int r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[slot[r]].push_back(i);
  }
  return out;
}

inline bool is_connected(const Graph& graph) {
  return graph.size() > 0 && connected_components(graph).size() == 1;
}

}  // namespace gfl
