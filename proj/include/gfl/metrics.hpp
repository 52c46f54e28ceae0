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
#include <span>
#include <string>
#include <vector>

#include "gfl/errors.hpp"

namespace gfl {

// counts(true, predicted).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes)
      : counts_(Eigen::MatrixXd::Zero(num_classes, num_classes)) {
    if (num_classes < 1) throw InputError("confusion matrix needs at least one class");
  }

  int num_classes() const { return static_cast<int>(counts_.rows()); }
  const Eigen::MatrixXd& counts() const { return counts_; }

  void add(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw InputError("truth and prediction counts differ");
    for (std::size_t i = 0; i < truth.size(); ++i) {
      check(truth[i]);
      check(predicted[i]);
      counts_(truth[i], predicted[i]) += 1.0;
    }
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.num_classes() != num_classes()) throw InputError("class count mismatch");
    counts_ += other.counts_;
    return *this;
  }

  double total() const { return counts_.sum(); }

  double accuracy() const {
    if (total() == 0.0) throw InputError("empty test set");
    return counts_.trace() / total();
  }

  // Macro averages over all classes; a class with no predictions (precision)
  // or no true samples (recall) contributes 0.
  double macro_precision() const {
    double sum = 0.0;
    for (int c = 0; c < num_classes(); ++c) {
      const double col = counts_.col(c).sum();
      if (col > 0.0) sum += counts_(c, c) / col;
    }
    return sum / num_classes();
  }

  double macro_recall() const {
    double sum = 0.0;
    for (int c = 0; c < num_classes(); ++c) {
      const double row = counts_.row(c).sum();
      if (row > 0.0) sum += counts_(c, c) / row;
    }
    return sum / num_classes();
  }

 private:
  void check(int y) const {
    if (y < 0 || y >= num_classes()) {
      throw InputError("label " + std::to_string(y) + " out of range");
    }
  }

  Eigen::MatrixXd counts_;
};

struct ClassificationIndices {
  double accuracy = 0.0;   // I1
  double precision = 0.0;  // I2
  double recall = 0.0;     // I3
  double f1 = 0.0;         // I4
};

inline ClassificationIndices classification_indices(const ConfusionMatrix& cm) {
  ClassificationIndices out;
  out.accuracy = cm.accuracy();
  out.precision = cm.macro_precision();
  out.recall = cm.macro_recall();
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Population standard deviation.
inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) return {};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

}  // namespace gfl
