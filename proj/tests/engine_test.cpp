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

#include <gtest/gtest.h>

#include <cmath>

#include "gfl/engine.hpp"

namespace gfl {
namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.rounds = 3;
  c.seed = 5;
  c.graph.devices = 8;
  c.graph.clusters = 2;
  c.graph.cluster_min = 3;
  c.graph.cluster_max = 5;
  c.data.dim = 8;
  c.data.per_class = 300;
  c.data.partition.train_per_device = 60;
  c.data.partition.local_test_per_device = 20;
  c.data.partition.global_test_size = 40;
  c.model.hidden = {16};
  return c;
}

double max_spread(const std::vector<Eigen::VectorXd>& ws) {
  double out = 0.0;
  for (const auto& w : ws) out = std::max(out, (w - ws.front()).cwiseAbs().maxCoeff());
  return out;
}

TEST(Simulation, IdenticalInitialWeights) {
  const ExperimentConfig c = small_config();
  Simulation sim(c, build_world(c));
  EXPECT_EQ(max_spread(sim.weights()), 0.0);
  EXPECT_GT(sim.weights().front().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simulation, HugeSmoothnessKeepsDevicesInSync) {
  ExperimentConfig c = small_config();
  c.mu_s = 1e12;
  Simulation sim(c, build_world(c));
  ASSERT_TRUE(is_connected(sim.world().graph));
  sim.run(3);
  EXPECT_LT(max_spread(sim.weights()), 1e-6);
}

TEST(Simulation, ZeroSmoothnessIsPureLocalTraining) {
  ExperimentConfig c = small_config();
  c.mu_s = 0.0;
  Simulation sim(c, build_world(c));
  const auto before = sim.weights();
  sim.run_round();
  // Equal dataset sizes give kappa = 1, and H = I.
  const std::size_t k = before.size();
  for (std::size_t i = 0; i < k; ++i) {
    LocalTraining lt{c.model.alpha, 1.0, c.model.batch_size, c.model.eta};
    Rng rng = make_rng(c.seed, Stream::device_round, i);
    const Eigen::VectorXd expected =
        client_update(sim.model(), before[i], sim.world().data.devices[i].train, lt, rng);
    EXPECT_LT((sim.weights()[i] - expected).cwiseAbs().maxCoeff(), 1e-12) << "device " << i;
  }
}

TEST(Simulation, ZeroLearningRateLeavesWeights) {
  for (Aggregator a : {Aggregator::fedavg, Aggregator::gfedfilt}) {
    ExperimentConfig c = small_config();
    c.model.eta = 0.0;
    c.aggregator = a;
    Simulation sim(c, build_world(c));
    const auto before = sim.weights();
    sim.run(2);
    EXPECT_EQ(sim.weights(), before);
  }
}

TEST(Simulation, FedAvgKeepsDevicesIdentical) {
  ExperimentConfig c = small_config();
  c.aggregator = Aggregator::fedavg;
  Simulation sim(c, build_world(c));
  sim.run(2);
  EXPECT_EQ(max_spread(sim.weights()), 0.0);
}

TEST(Simulation, Deterministic) {
  const ExperimentConfig c = small_config();
  const MetricsLog a = run_experiment(c);
  const MetricsLog b = run_experiment(c);
  ASSERT_EQ(a.rounds.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(a.rounds[r].local_accuracy, b.rounds[r].local_accuracy);
    EXPECT_EQ(a.rounds[r].global_accuracy, b.rounds[r].global_accuracy);
    EXPECT_EQ(a.rounds[r].latency, b.rounds[r].latency);
  }
}

TEST(Simulation, RecordsAreConsistent) {
  const ExperimentConfig c = small_config();
  const MetricsLog log = run_experiment(c);
  double latency = 0.0;
  for (std::size_t r = 0; r < log.rounds.size(); ++r) {
    const auto& rec = log.rounds[r];
    EXPECT_EQ(rec.round, static_cast<int>(r) + 1);
    EXPECT_EQ(rec.confusion_total, 8.0 * 20.0);
    EXPECT_GE(rec.latency, rec.desync);
    latency += rec.t_round;
    EXPECT_NEAR(rec.latency, latency, 1e-12);
    EXPECT_GE(rec.indices.accuracy, 0.0);
    EXPECT_LE(rec.indices.accuracy, 1.0);
    EXPECT_NEAR(rec.indices.accuracy, rec.acc_local.mean, 1e-12);  // equal test sizes
    EXPECT_EQ(rec.local_accuracy.size(), 8u);
  }
  EXPECT_LT(log.rounds[0].flops, log.rounds[2].flops);
}

TEST(Simulation, OptimizedScheduleMeetsDeadline) {
  ExperimentConfig c = small_config();
  c.optimize = true;
  const MetricsLog opt = run_experiment(c);
  c.optimize = false;
  const MetricsLog plain = run_experiment(c);
  const auto& rec = opt.rounds.back();
  EXPECT_GT(rec.t_opt, 0.0);
  for (const auto& d : rec.devices) {
    EXPECT_LE(d.tau, rec.t_opt);
    EXPECT_LE(d.energy, c.system.e_max);
    EXPECT_GE(d.alpha, c.schedule.alpha_min);
    EXPECT_LE(d.alpha, c.schedule.alpha_max);
  }
  EXPECT_LE(rec.t_round, rec.t_opt);
  EXPECT_LT(rec.desync, plain.rounds.back().desync);
  EXPECT_LT(rec.latency, plain.rounds.back().latency);
}

TEST(CostModel, MatchesSimulationWithoutOptimizer) {
  const ExperimentConfig c = small_config();
  const World w = build_world(c);
  std::vector<std::size_t> sizes;
  for (const auto& d : w.data.devices) sizes.push_back(d.train.labels.size());
  const CostTotals t =
      run_cost_model(w.specs, sizes, w.model, c.schedule, c.system.n0_dbm_per_hz, c.model.alpha, false, 3);
  Simulation sim(c, w);
  const auto& rec = sim.run(3).rounds.back();
  EXPECT_DOUBLE_EQ(t.latency, rec.latency);
  EXPECT_DOUBLE_EQ(t.desync, rec.desync);
  EXPECT_DOUBLE_EQ(t.flops, rec.flops);
  // alpha_default epochs over every sample.
  const double phi = static_cast<double>(flops_per_sample(w.model));
  EXPECT_DOUBLE_EQ(t.flops, 3.0 * 8 * c.model.alpha * 60 * phi);
  std::vector<double> tau;
  for (std::size_t i = 0; i < w.specs.size(); ++i) {
    tau.push_back(round_costs(w.specs[i], c.model.alpha, 60.0, payload_size(w.model.parameter_count(), 1.0),
                              c.system.n0_dbm_per_hz)
                      .tau_total);
  }
  EXPECT_DOUBLE_EQ(t.last.t_round, *std::max_element(tau.begin(), tau.end()));
  EXPECT_DOUBLE_EQ(t.last.desync, t.last.t_round - *std::min_element(tau.begin(), tau.end()));
}

}  // namespace
}  // namespace gfl
