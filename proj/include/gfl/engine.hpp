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
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gfl/config.hpp"
#include "gfl/errors.hpp"
#include "gfl/filter.hpp"
#include "gfl/learner.hpp"
#include "gfl/metrics.hpp"
#include "gfl/optimizer.hpp"
#include "gfl/setup.hpp"
#include "gfl/sysmodel.hpp"

namespace gfl {

// Knobs one device used in one round.
struct DeviceRound {
  int alpha = 1;
  double q = 1.0;
  double z = 1.0;
  std::size_t n_samples = 0;
  double payload_bits = 0.0;
  double tau = 0.0;
  double energy = 0.0;
};

struct RoundRecord {
  int round = 0;
  MeanStd acc_local;
  MeanStd acc_global;
  ClassificationIndices indices;  // I1..I4, pooled over local tests
  double flops = 0.0;             // I5, cumulative
  double latency = 0.0;           // I6, cumulative
  double desync = 0.0;            // I7, cumulative
  double t_round = 0.0;           // T of this round
  double t_opt = 0.0;             // deadline when scheduling, else 0
  double heterogeneity = 0.0;     // H
  double confusion_total = 0.0;
  std::vector<DeviceRound> devices;
  std::vector<double> local_accuracy;
  std::vector<double> global_accuracy;
};

struct MetricsLog {
  std::vector<RoundRecord> rounds;
};

// Cost side of a round: which knobs each device uses and what it pays.
struct RoundSchedule {
  double t_opt = 0.0;
  std::vector<DeviceRound> devices;
  double t_round = 0.0;
  double desync = 0.0;
};

// Defaults (alpha_default, q = 1, z = 1) or the optimizer's plan, priced with
// the system model.
inline RoundSchedule schedule_round(std::span<const DeviceSpec> specs,
                                    std::span<const std::size_t> dataset_sizes,
                                    std::int64_t parameter_count, const ScheduleBounds& bounds,
                                    double n0_dbm_per_hz, int alpha_default, bool optimize) {
  RoundSchedule out;
  if (optimize) {
    const RoundPlan plan =
        solve_round_plan(specs, dataset_sizes, parameter_count, bounds, n0_dbm_per_hz);
    out.t_opt = plan.t_opt;
    for (const auto& p : plan.devices) {
      out.devices.push_back({p.alpha, p.q, p.z, p.n_samples, p.payload_bits, 0.0, 0.0});
    }
  } else {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      out.devices.push_back({alpha_default, 1.0, 1.0, dataset_sizes[i],
                             payload_size(parameter_count, 1.0), 0.0, 0.0});
    }
  }
  double fastest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& d = out.devices[i];
    const RoundCosts rc = round_costs(specs[i], d.alpha, static_cast<double>(d.n_samples),
                                      d.payload_bits, n0_dbm_per_hz);
    d.tau = rc.tau_total;
    d.energy = rc.energy();
    out.t_round = std::max(out.t_round, d.tau);
    fastest = std::min(fastest, d.tau);
  }
  out.desync = out.t_round - fastest;
  return out;
}

struct CostTotals {
  double latency = 0.0;  // I6
  double desync = 0.0;   // I7
  double flops = 0.0;    // I5
  RoundSchedule last;
};

// Cost model without training: R rounds of the same schedule.
inline CostTotals run_cost_model(std::span<const DeviceSpec> specs,
                                 std::span<const std::size_t> dataset_sizes,
                                 const ModelConfig& model, const ScheduleBounds& bounds,
                                 double n0_dbm_per_hz, int alpha_default, bool optimize, int rounds) {
  CostTotals t;
  const std::int64_t b = model.parameter_count();
  const double phi = static_cast<double>(flops_per_sample(model));
  for (int r = 0; r < rounds; ++r) {
    t.last = schedule_round(specs, dataset_sizes, b, bounds, n0_dbm_per_hz, alpha_default, optimize);
    t.latency += t.last.t_round;
    t.desync += t.last.desync;
    for (const auto& d : t.last.devices) t.flops += d.alpha * phi * static_cast<double>(d.n_samples);
  }
  return t;
}

class Simulation {
 public:
  Simulation(ExperimentConfig config, World world)
      : config_(std::move(config)),
        world_(std::move(world)),
        model_(world_.model),
        filter_(world_.spectrum) {
    const std::size_t k = world_.data.devices.size();
    if (k == 0 || static_cast<Eigen::Index>(k) != world_.graph.size() || world_.specs.size() != k) {
      throw InputError("graph, data and device specs disagree on K");
    }
    for (const auto& d : world_.data.devices) sizes_.push_back(d.train.labels.size());
    kappa_ = AggregationWeights::from_dataset_sizes(sizes_);
    Rng init = make_rng(config_.seed, Stream::device_init);
    const Eigen::VectorXd w0 = model_.init(init);
    weights_.assign(k, w0);
    heterogeneity_ = heterogeneity_indicator(world_.specs, config_.model.alpha,
                                             config_.system.n0_dbm_per_hz);
  }

  const ExperimentConfig& config() const { return config_; }
  const World& world() const { return world_; }
  const Mlp& model() const { return model_; }
  const std::vector<Eigen::VectorXd>& weights() const { return weights_; }
  std::vector<Eigen::VectorXd>& mutable_weights() { return weights_; }
  const MetricsLog& log() const { return log_; }
  double heterogeneity() const { return heterogeneity_; }
  int rounds_done() const { return static_cast<int>(log_.rounds.size()); }

  const RoundRecord& run_round() {
    const int t = rounds_done();
    const std::size_t k = weights_.size();
    if (!schedule_) {
      // Specs and dataset sizes do not change between rounds, so neither
      // does the plan.
      schedule_ = schedule_round(world_.specs, sizes_, model_.parameter_count(), config_.schedule,
                                 config_.system.n0_dbm_per_hz, config_.model.alpha,
                                 config_.optimize);
    }

    Matrix g(static_cast<Eigen::Index>(k), model_.parameter_count());
    for (std::size_t i = 0; i < k; ++i) {
      const DeviceRound& plan = schedule_->devices[i];
      LocalTraining lt{plan.alpha, plan.q, config_.model.batch_size, config_.model.eta};
      Rng rng = make_rng(config_.seed, Stream::device_round,
                         static_cast<std::uint64_t>(t) * k + i);
      Eigen::VectorXd update =
          client_update(model_, weights_[i], world_.data.devices[i].train, lt, rng) - weights_[i];
      if (!update.allFinite()) {
        throw NumericalError("device " + std::to_string(i) + " produced a non-finite gradient");
      }
      if (plan.z < 1.0) update = sparsify(update, plan.z).densify();
      g.row(static_cast<Eigen::Index>(i)) = update.transpose();
    }

    if (config_.aggregator == Aggregator::gfedfilt) {
      const Matrix& h = filter_.matrix(FilterSpec{config_.mu_s});
      const Matrix g_hat = aggregate(h, kappa_, g);
      for (std::size_t i = 0; i < k; ++i) {
        weights_[i] += g_hat.row(static_cast<Eigen::Index>(i)).transpose();
      }
    } else {
      const Vector mean = fedavg(kappa_.normalized(), g);
      for (auto& w : weights_) w += mean;
    }

    RoundRecord rec = evaluate();
    rec.round = t + 1;
    rec.devices = schedule_->devices;
    rec.t_opt = schedule_->t_opt;
    rec.t_round = schedule_->t_round;
    const RoundRecord* prev = log_.rounds.empty() ? nullptr : &log_.rounds.back();
    const double phi = static_cast<double>(flops_per_sample(world_.model));
    double flops = 0.0;
    for (const auto& d : rec.devices) flops += d.alpha * phi * static_cast<double>(d.n_samples);
    rec.flops = (prev ? prev->flops : 0.0) + flops;
    rec.latency = (prev ? prev->latency : 0.0) + schedule_->t_round;
    rec.desync = (prev ? prev->desync : 0.0) + schedule_->desync;
    rec.heterogeneity = heterogeneity_;
    log_.rounds.push_back(std::move(rec));
    return log_.rounds.back();
  }

  // I1..I4 over the pooled local-test confusion matrix, plus per-device
  // local and global accuracy.
  RoundRecord evaluate() const {
    RoundRecord rec;
    const int classes = world_.model.num_classes();
    ConfusionMatrix total(classes);
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const auto& local = world_.data.devices[i].local_test;
      if (local.empty()) throw InputError("device " + std::to_string(i) + " has an empty test set");
      ConfusionMatrix cm(classes);
      cm.add(local.labels, model_.predict(weights_[i], local.inputs));
      rec.local_accuracy.push_back(cm.accuracy());
      total += cm;
      const auto& global = world_.data.global_test;
      ConfusionMatrix gcm(classes);
      gcm.add(global.labels, model_.predict(weights_[i], global.inputs));
      rec.global_accuracy.push_back(gcm.accuracy());
    }
    rec.indices = classification_indices(total);
    rec.confusion_total = total.total();
    rec.acc_local = mean_std(rec.local_accuracy);
    rec.acc_global = mean_std(rec.global_accuracy);
    return rec;
  }

  const MetricsLog& run(int rounds) {
    for (int r = 0; r < rounds; ++r) run_round();
    return log_;
  }

 private:
  ExperimentConfig config_;
  World world_;
  Mlp model_;
  FilterCache filter_;
  std::vector<std::size_t> sizes_;
  AggregationWeights kappa_;
  std::vector<Eigen::VectorXd> weights_;
  double heterogeneity_ = 0.0;
  std::optional<RoundSchedule> schedule_;
  MetricsLog log_;
};

inline MetricsLog run_experiment(const ExperimentConfig& config) {
  Simulation sim(config, build_world(config));
  return sim.run(config.rounds);
}

}  // namespace gfl
