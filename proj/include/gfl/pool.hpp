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
#include <span>
#include <string>
#include <vector>

#include "gfl/errors.hpp"

namespace gfl {

// Samples as rows of `inputs`, one label per row.
struct LabeledPool {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
  int num_classes = 0;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  bool empty() const { return labels.empty(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
  }

  void validate() const {
    if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
      throw InputError("pool has " + std::to_string(inputs.rows()) + " inputs but " +
                       std::to_string(labels.size()) + " labels");
    }
    for (int y : labels) {
      if (y < 0 || y >= num_classes) {
        throw InputError("label " + std::to_string(y) + " outside [0, " +
                         std::to_string(num_classes) + ")");
      }
    }
    if (!inputs.allFinite()) throw InputError("pool has non-finite features");
  }

  LabeledPool subset(std::span<const std::size_t> rows) const {
    LabeledPool out;
    out.num_classes = num_classes;
    out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.inputs.row(static_cast<Eigen::Index>(i)) =
          inputs.row(static_cast<Eigen::Index>(rows[i]));
      out.labels.push_back(labels[rows[i]]);
    }
    return out;
  }
};

// Number of samples a device trains on when it uses fraction q of its
// dataset: ceil(q * |D|). The 1e-9 slack keeps q = n / |D| mapping back to n.
inline std::size_t fraction_to_count(double q, std::size_t dataset_size) {
  if (!(q > 0.0) || q > 1.0) throw InputError("data fraction q must lie in (0, 1]");
  const double raw = q * static_cast<double>(dataset_size);
  if (raw < 1.0 - 1e-9) throw InputError("q * |D| < 1: no samples selected");
  const auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(std::max<std::size_t>(n, 1), dataset_size);
}

}  // namespace gfl
