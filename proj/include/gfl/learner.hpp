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
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gfl/errors.hpp"
#include "gfl/pool.hpp"
#include "gfl/rng.hpp"

namespace gfl {

enum class Activation { relu };

// Fully connected classifier: layer_sizes = {input, hidden..., classes}. ReLU
// between layers, softmax at the output.
struct ModelConfig {
  std::vector<int> layer_sizes;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  void validate() const {
    if (layer_sizes.size() < 2) throw InputError("model needs at least two layer sizes");
    for (int s : layer_sizes) {
      if (s < 1) throw InputError("layer sizes must be at least 1");
    }
  }

  int input_dim() const { return layer_sizes.front(); }
  int num_classes() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  Eigen::Index parameter_count() const {
    Eigen::Index b = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      b += static_cast<Eigen::Index>(layer_sizes[l] + 1) * layer_sizes[l + 1];
    }
    return b;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Structured view of one dense layer; weights are fan_in x fan_out.
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

// FLOPs for one sample: forward is sum of 2 * fan_in * fan_out over layers,
// backward counted as twice the forward pass.
inline std::int64_t flops_per_sample(const ModelConfig& config) {
  config.validate();
  std::int64_t forward = 0;
  for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
    forward += 2LL * config.layer_sizes[l] * config.layer_sizes[l + 1];
  }
  return 3 * forward;
}

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

class Mlp {
 public:
  explicit Mlp(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < config_.num_layers(); ++l) {
      offsets_.push_back(offset);
      offset += static_cast<Eigen::Index>(fan_in(l) + 1) * fan_out(l);
    }
    parameter_count_ = offset;
  }

  const ModelConfig& config() const { return config_; }
  Eigen::Index parameter_count() const { return parameter_count_; }

  // Glorot-uniform weights, zero biases.
  Eigen::VectorXd init(Rng& rng) const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(parameter_count_);
    for (std::size_t l = 0; l < config_.num_layers(); ++l) {
      const double limit = std::sqrt(6.0 / (fan_in(l) + fan_out(l)));
      std::uniform_real_distribution<double> dist(-limit, limit);
      const Eigen::Index n = static_cast<Eigen::Index>(fan_in(l)) * fan_out(l);
      for (Eigen::Index i = 0; i < n; ++i) w(offsets_[l] + i) = dist(rng);
    }
    return w;
  }

  std::vector<DenseLayer> unflatten(const Eigen::VectorXd& w) const {
    check_weights(w);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < config_.num_layers(); ++l) {
      layers.push_back({weight_map(w, l), bias_map(w, l)});
    }
    return layers;
  }

  Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers) const {
    if (layers.size() != config_.num_layers()) throw InputError("layer count mismatch");
    Eigen::VectorXd w(parameter_count_);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].weights.rows() != fan_in(l) || layers[l].weights.cols() != fan_out(l) ||
          layers[l].bias.size() != fan_out(l)) {
        throw InputError("layer " + std::to_string(l) + " has the wrong shape");
      }
      weight_map(w, l) = layers[l].weights;
      bias_map(w, l) = layers[l].bias;
    }
    return w;
  }

  // Class probabilities, one row per input row.
  Eigen::MatrixXd forward(const Eigen::VectorXd& w, const Eigen::MatrixXd& inputs) const {
    check_weights(w);
    check_inputs(inputs);
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < config_.num_layers(); ++l) {
      Eigen::MatrixXd z = a * weight_map(w, l);
      z.rowwise() += bias_map(w, l).transpose();
      if (l + 1 < config_.num_layers()) {
        a = z.cwiseMax(0.0);
      } else {
        a = softmax_rows(z);
      }
    }
    if (!a.allFinite()) throw NumericalError("forward pass produced non-finite output");
    return a;
  }

  std::vector<int> predict(const Eigen::VectorXd& w, const Eigen::MatrixXd& inputs) const {
    const Eigen::MatrixXd p = forward(w, inputs);
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      Eigen::Index arg = 0;
      p.row(i).maxCoeff(&arg);
      out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
  }

  // Mean cross-entropy over the batch and its gradient with respect to w.
  LossAndGradient loss_and_gradient(const Eigen::VectorXd& w, const Eigen::MatrixXd& inputs,
                                    std::span<const int> labels) const {
    check_weights(w);
    check_inputs(inputs);
    const Eigen::Index m = inputs.rows();
    if (m < 1) throw InputError("batch must contain at least one sample");
    if (static_cast<Eigen::Index>(labels.size()) != m) {
      throw InputError("batch has mismatched input and label counts");
    }
    for (int y : labels) {
      if (y < 0 || y >= config_.num_classes()) {
        throw InputError("label " + std::to_string(y) + " out of range");
      }
    }

    const std::size_t layers = config_.num_layers();
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(layers);
    acts.push_back(inputs);
    Eigen::MatrixXd logits;
    for (std::size_t l = 0; l < layers; ++l) {
      Eigen::MatrixXd z = acts.back() * weight_map(w, l);
      z.rowwise() += bias_map(w, l).transpose();
      if (l + 1 < layers) {
        acts.push_back(z.cwiseMax(0.0));
      } else {
        logits = std::move(z);
      }
    }

    const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    Eigen::MatrixXd shifted = logits.colwise() - row_max;
    Eigen::MatrixXd probs = shifted.array().exp().matrix();
    const Eigen::VectorXd sums = probs.rowwise().sum();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      loss += std::log(sums(i)) - shifted(i, labels[static_cast<std::size_t>(i)]);
    }
    loss /= static_cast<double>(m);
    if (!std::isfinite(loss)) throw NumericalError("loss is not finite");

    probs.array().colwise() /= sums.array();
    Eigen::MatrixXd delta = std::move(probs);
    for (Eigen::Index i = 0; i < m; ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= static_cast<double>(m);

    LossAndGradient out{loss, Eigen::VectorXd::Zero(parameter_count_)};
    for (std::size_t l = layers; l-- > 0;) {
      weight_map(out.gradient, l) = acts[l].transpose() * delta;
      bias_map(out.gradient, l) = delta.colwise().sum().transpose();
      if (l > 0) {
        Eigen::MatrixXd back = delta * weight_map(w, l).transpose();
        delta = (acts[l].array() > 0.0).select(back, 0.0);
      }
    }
    return out;
  }

 private:
  int fan_in(std::size_t l) const { return config_.layer_sizes[l]; }
  int fan_out(std::size_t l) const { return config_.layer_sizes[l + 1]; }

  Eigen::Map<Eigen::MatrixXd> weight_map(Eigen::VectorXd& w, std::size_t l) const {
    return {w.data() + offsets_[l], fan_in(l), fan_out(l)};
  }
  Eigen::Map<const Eigen::MatrixXd> weight_map(const Eigen::VectorXd& w, std::size_t l) const {
    return {w.data() + offsets_[l], fan_in(l), fan_out(l)};
  }
  Eigen::Map<Eigen::VectorXd> bias_map(Eigen::VectorXd& w, std::size_t l) const {
    return {w.data() + offsets_[l] + static_cast<Eigen::Index>(fan_in(l)) * fan_out(l),
            fan_out(l)};
  }
  Eigen::Map<const Eigen::VectorXd> bias_map(const Eigen::VectorXd& w, std::size_t l) const {
    return {w.data() + offsets_[l] + static_cast<Eigen::Index>(fan_in(l)) * fan_out(l),
            fan_out(l)};
  }

  void check_weights(const Eigen::VectorXd& w) const {
    if (w.size() != parameter_count_) {
      throw InputError("weight vector has " + std::to_string(w.size()) + " entries, expected " +
                       std::to_string(parameter_count_));
    }
  }
  void check_inputs(const Eigen::MatrixXd& inputs) const {
    if (inputs.cols() != config_.input_dim()) {
      throw InputError("input dimension " + std::to_string(inputs.cols()) +
                       " does not match model input " + std::to_string(config_.input_dim()));
    }
  }

  static Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd e = (z.colwise() - z.rowwise().maxCoeff()).array().exp().matrix();
    e.array().colwise() /= e.rowwise().sum().array();
    return e;
  }

  ModelConfig config_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index parameter_count_ = 0;
};

struct LocalTraining {
  int alpha = 3;
  double q = 1.0;
  int batch_size = 32;
  double eta = 0.05;
};

// Alpha epochs of mini-batch SGD over ceil(q * |D|) samples drawn without
// replacement from `rng`. The last partial batch of each epoch is used.
inline Eigen::VectorXd client_update(const Mlp& model, Eigen::VectorXd weights,
                                     const LabeledPool& data, const LocalTraining& params,
                                     Rng& rng) {
  if (params.alpha < 1) throw InputError("alpha must be at least 1");
  if (params.batch_size < 1) throw InputError("batch size must be at least 1");
  if (!(params.eta >= 0.0) || !std::isfinite(params.eta)) {
    throw InputError("learning rate must be finite and nonnegative");
  }
  const std::size_t total = data.labels.size();
  const std::size_t n = fraction_to_count(params.q, total);

  std::vector<std::size_t> rows(total);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (n < total) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(n);
  }

  const auto bs = static_cast<std::size_t>(params.batch_size);
  Eigen::MatrixXd batch;
  std::vector<int> labels;
  for (int epoch = 0; epoch < params.alpha; ++epoch) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t m = std::min(bs, n - start);
      batch.resize(static_cast<Eigen::Index>(m), data.dim());
      labels.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) =
            data.inputs.row(static_cast<Eigen::Index>(rows[start + i]));
        labels[i] = data.labels[rows[start + i]];
      }
      const LossAndGradient lg = model.loss_and_gradient(weights, batch, labels);
      weights -= params.eta * lg.gradient;
    }
  }
  return weights;
}

}  // namespace gfl
