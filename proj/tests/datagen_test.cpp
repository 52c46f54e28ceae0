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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "gfl/datagen.hpp"
#include "gfl/learner.hpp"
#include "gfl/metrics.hpp"

namespace gfl {
namespace {

Graph clustered_graph(const std::vector<int>& clusters) {
  const auto k = static_cast<Eigen::Index>(clusters.size());
  Matrix a = Matrix::Ones(k, k);
  a.diagonal().setZero();
  return make_graph(a, clusters);
}

std::vector<int> standard_clusters() {
  std::vector<int> c;
  for (int j = 0; j < 4; ++j) c.insert(c.end(), 5, j);
  return c;
}

TEST(SynthPool, ShapeAndDeterminism) {
  Rng a(1), b(1);
  const LabeledPool p = synth_gaussian_pool(10, 16, 50, 3.0, a);
  const LabeledPool q = synth_gaussian_pool(10, 16, 50, 3.0, b);
  EXPECT_EQ(p.size(), 500);
  EXPECT_EQ(p.dim(), 16);
  EXPECT_EQ(p.inputs, q.inputs);
  EXPECT_EQ(p.labels, q.labels);
  for (auto c : p.class_counts()) EXPECT_EQ(c, 50u);
}

double train_accuracy(const LabeledPool& pool, std::vector<int> layers, int epochs) {
  Mlp m(ModelConfig{std::move(layers)});
  Rng rng(3);
  Eigen::VectorXd w = m.init(rng);
  w = client_update(m, w, pool, LocalTraining{epochs, 1.0, 32, 0.1}, rng);
  ConfusionMatrix cm(pool.num_classes);
  cm.add(pool.labels, m.predict(w, pool.inputs));
  return cm.accuracy();
}

TEST(SynthPool, WellSeparatedIsLinearlyLearnable) {
  Rng rng(2);
  const LabeledPool p = synth_gaussian_pool(10, 16, 100, 10.0, rng);
  EXPECT_GT(train_accuracy(p, {16, 10}, 20), 0.95);
}

TEST(SynthPool, ZeroSeparationIsChance) {
  Rng rng(4);
  LabeledPool p = synth_gaussian_pool(10, 16, 100, 0.0, rng);
  // Held-out accuracy of a model fitted to pure noise.
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < p.labels.size(); ++i) (i % 2 ? test : train).push_back(i);
  const LabeledPool tr = p.subset(train), te = p.subset(test);
  Mlp m(ModelConfig{{16, 10}});
  Rng r(5);
  Eigen::VectorXd w = client_update(m, m.init(r), tr, LocalTraining{10, 1.0, 32, 0.05}, r);
  ConfusionMatrix cm(10);
  cm.add(te.labels, m.predict(w, te.inputs));
  EXPECT_NEAR(cm.accuracy(), 0.1, 0.1);
}

TEST(SynthPool, RejectsBadArguments) {
  Rng rng(1);
  EXPECT_THROW(synth_gaussian_pool(0, 4, 10, 1.0, rng), InputError);
  EXPECT_THROW(synth_gaussian_pool(3, 4, 10, -1.0, rng), InputError);
}

TEST(Partition, TwoLabelsPerDevice) {
  Rng rng(6);
  const LabeledPool pool = synth_gaussian_pool(10, 8, 2500, 3.0, rng);
  const Graph g = clustered_graph(standard_clusters());
  PartitionSpec spec;  // L = 2, 450 / 100 / 100
  const Partition part = partition(pool, spec, g, rng);
  ASSERT_EQ(part.devices.size(), 20u);
  std::set<std::size_t> all_train;
  std::set<int> union_labels;
  for (const auto& d : part.devices) {
    EXPECT_EQ(d.train.labels.size(), 450u);
    EXPECT_EQ(d.local_test.labels.size(), 100u);
    EXPECT_EQ(std::set<int>(d.train.labels.begin(), d.train.labels.end()).size(), 2u);
    EXPECT_EQ(d.allowed_labels.size(), 2u);
    for (int y : d.train.labels) EXPECT_TRUE(std::count(d.allowed_labels.begin(), d.allowed_labels.end(), y));
    for (int y : d.local_test.labels) EXPECT_TRUE(std::count(d.allowed_labels.begin(), d.allowed_labels.end(), y));
    const std::set<std::size_t> tr(d.train_rows.begin(), d.train_rows.end());
    for (std::size_t r : d.local_test_rows) EXPECT_FALSE(tr.count(r));
    for (std::size_t r : d.train_rows) EXPECT_TRUE(all_train.insert(r).second) << "row " << r << " reused";
    union_labels.insert(d.allowed_labels.begin(), d.allowed_labels.end());
  }
  EXPECT_EQ(union_labels.size(), 10u);
  EXPECT_EQ(part.global_test.labels.size(), 100u);
  EXPECT_EQ(std::set<int>(part.global_test.labels.begin(), part.global_test.labels.end()).size(), 10u);
  for (std::size_t r : part.global_test_rows) EXPECT_FALSE(all_train.count(r));
}

TEST(Partition, AllLabelsIsIid) {
  Rng rng(7);
  const LabeledPool pool = synth_gaussian_pool(4, 4, 600, 3.0, rng);
  const Graph g = clustered_graph({0, 0, 1, 1});
  PartitionSpec spec{4, 100, 20, 20, PartitionSetup::random};
  const Partition part = partition(pool, spec, g, rng);
  for (const auto& d : part.devices) EXPECT_EQ(d.allowed_labels, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Partition, ClusterAlignedOverlap) {
  Rng rng(8);
  const LabeledPool pool = synth_gaussian_pool(10, 4, 1500, 3.0, rng);
  const Graph g = clustered_graph(standard_clusters());
  PartitionSpec spec{4, 100, 20, 20, PartitionSetup::cluster_aligned};
  const Partition part = partition(pool, spec, g, rng);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = i + 1; j < 20; ++j) {
      if (g.device_ids[i].cluster_index != g.device_ids[j].cluster_index) continue;
      std::vector<int> both;
      std::set_intersection(part.devices[i].allowed_labels.begin(), part.devices[i].allowed_labels.end(),
                            part.devices[j].allowed_labels.begin(), part.devices[j].allowed_labels.end(),
                            std::back_inserter(both));
      EXPECT_GE(both.size(), 3u);
    }
  }
}

TEST(Partition, ClusterAlignedCoversAllClasses) {
  std::set<int> seen;
  for (int c = 0; c < 4; ++c) {
    for (int l = 0; l < 2; ++l) {
      for (int y : cluster_aligned_labels(10, 2, 4, DeviceId{c, l})) seen.insert(y);
    }
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Partition, InsufficientSamplesNamesClass) {
  LabeledPool pool;
  pool.num_classes = 2;
  pool.inputs = Eigen::MatrixXd::Zero(3, 2);
  pool.labels = {0, 0, 0};
  Rng rng(1);
  try {
    partition(pool, PartitionSpec{1, 1, 1, 2, PartitionSetup::random}, clustered_graph({0}), rng);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxFiles {
  std::filesystem::path images, labels;
};

IdxFiles write_idx(const std::string& stem, std::uint32_t n, std::uint32_t label_n, std::uint32_t image_magic,
                   bool truncate) {
  const auto dir = std::filesystem::temp_directory_path();
  IdxFiles f{dir / (stem + "-images.idx"), dir / (stem + "-labels.idx")};
  {
    std::ofstream out(f.images, std::ios::binary);
    write_be32(out, image_magic);
    write_be32(out, n);
    write_be32(out, 28);
    write_be32(out, 28);
    const std::size_t bytes = n * 784u - (truncate ? 10u : 0u);
    for (std::size_t i = 0; i < bytes; ++i) out.put(static_cast<char>(i % 256));
  }
  {
    std::ofstream out(f.labels, std::ios::binary);
    write_be32(out, 0x801);
    write_be32(out, label_n);
    for (std::uint32_t i = 0; i < label_n; ++i) out.put(static_cast<char>(i % 10));
  }
  return f;
}

TEST(Mnist, ParsesIdx) {
  const auto f = write_idx("ok", 3, 3, 0x803, false);
  const LabeledPool p = load_mnist_idx(f.images, f.labels);
  EXPECT_EQ(p.size(), 3);
  EXPECT_EQ(p.dim(), 784);
  EXPECT_EQ(p.num_classes, 10);
  EXPECT_EQ(p.labels, (std::vector<int>{0, 1, 2}));
  EXPECT_DOUBLE_EQ(p.inputs(0, 255), 1.0);
  EXPECT_DOUBLE_EQ(p.inputs(0, 0), 0.0);
  EXPECT_LE(p.inputs.maxCoeff(), 1.0);
}

TEST(Mnist, RejectsBadFiles) {
  const auto truncated = write_idx("trunc", 3, 3, 0x803, true);
  EXPECT_THROW(load_mnist_idx(truncated.images, truncated.labels), IngestError);
  const auto magic = write_idx("magic", 3, 3, 0x802, false);
  EXPECT_THROW(load_mnist_idx(magic.images, magic.labels), IngestError);
  const auto count = write_idx("count", 3, 2, 0x803, false);
  EXPECT_THROW(load_mnist_idx(count.images, count.labels), IngestError);
  EXPECT_THROW(load_mnist_idx("/nonexistent/a", "/nonexistent/b"), IngestError);
}

}  // namespace
}  // namespace gfl
