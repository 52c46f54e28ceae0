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
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gfl/errors.hpp"
#include "gfl/graph.hpp"
#include "gfl/pool.hpp"
#include "gfl/rng.hpp"

namespace gfl {

enum class PartitionSetup {
  cluster_aligned,  // devices of one cluster share L-1 of their L labels
  random,           // label sets drawn without regard to the graph
};

struct PartitionSpec {
  int labels_per_device = 2;
  std::size_t train_per_device = 450;
  std::size_t local_test_per_device = 100;
  std::size_t global_test_size = 100;
  PartitionSetup setup = PartitionSetup::random;

  void validate(int num_classes) const {
    if (labels_per_device < 1 || labels_per_device > num_classes) {
      throw InputError("labels_per_device must lie in [1, num_classes]");
    }
    if (train_per_device == 0 || local_test_per_device == 0 || global_test_size == 0) {
      throw InputError("partition sample counts must be positive");
    }
    if (global_test_size < static_cast<std::size_t>(num_classes)) {
      throw InputError("global test set must hold at least one sample per class");
    }
  }

  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

struct DeviceData {
  LabeledPool train;
  LabeledPool local_test;
  std::vector<int> allowed_labels;  // ascending
  std::vector<std::size_t> train_rows;  // rows of the source pool
  std::vector<std::size_t> local_test_rows;
};

struct Partition {
  std::vector<DeviceData> devices;
  LabeledPool global_test;
  std::vector<std::size_t> global_test_rows;
};

// Label window of one device under the cluster-aligned setup. Clusters are
// spaced so that their windows jointly cover every class; odd local indices
// shift the window by one.
inline std::vector<int> cluster_aligned_labels(int num_classes, int labels_per_device,
                                               int num_clusters, const DeviceId& id) {
  const int spread = (num_classes + std::max(num_clusters, 1) - 1) / std::max(num_clusters, 1);
  const int stride = std::max(labels_per_device - 1, spread);
  const int start = (id.cluster_index * stride + (id.local_index % 2)) % num_classes;
  std::vector<int> labels;
  for (int i = 0; i < labels_per_device; ++i) labels.push_back((start + i) % num_classes);
  std::sort(labels.begin(), labels.end());
  return labels;
}

namespace detail {

inline std::vector<std::vector<int>> random_label_sets(int num_classes, int labels_per_device,
                                                       std::size_t devices, Rng& rng) {
  // Dealt from a reshuffled deck so every class gets used before any repeats.
  std::deque<int> deck;
  auto refill = [&] {
    std::vector<int> all(static_cast<std::size_t>(num_classes));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    deck.insert(deck.end(), all.begin(), all.end());
  };
  std::vector<std::vector<int>> out;
  for (std::size_t d = 0; d < devices; ++d) {
    std::set<int> chosen;
    std::vector<int> skipped;
    while (static_cast<int>(chosen.size()) < labels_per_device) {
      if (deck.empty()) refill();
      const int label = deck.front();
      deck.pop_front();
      if (!chosen.insert(label).second) skipped.push_back(label);
    }
    deck.insert(deck.begin(), skipped.begin(), skipped.end());
    out.emplace_back(chosen.begin(), chosen.end());
  }
  return out;
}

// Hands out rows of one class: fresh rows first, then with replacement from
// everything not reserved for the global test.
class ClassSampler {
 public:
  ClassSampler(int label, std::vector<std::size_t> rows) : label_(label), rows_(std::move(rows)) {}

  std::size_t take(Rng& rng, const std::set<std::size_t>& forbidden) {
    if (next_ < rows_.size()) return rows_[next_++];
    std::vector<std::size_t> candidates;
    for (std::size_t r : rows_) {
      if (!forbidden.count(r)) candidates.push_back(r);
    }
    if (candidates.empty()) {
      throw InputError("insufficient samples for class " + std::to_string(label_));
    }
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    return candidates[pick(rng)];
  }

  std::size_t take_reserved() {
    if (next_ >= rows_.size()) {
      throw InputError("insufficient samples for class " + std::to_string(label_));
    }
    return rows_[next_++];
  }

  // Drops the rows handed out by take_reserved() from the stock for good.
  void drop_reserved() {
    rows_.erase(rows_.begin(), rows_.begin() + static_cast<std::ptrdiff_t>(next_));
    next_ = 0;
  }

 private:
  int label_;
  std::vector<std::size_t> rows_;
  std::size_t next_ = 0;
};

inline std::vector<std::size_t> split_evenly(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

}  // namespace detail

// Per-device train/local-test sets with controlled label skew, plus a shared
// global test set covering every class. The global test set is carved out
// first and never overlaps device data; device shards are disjoint until a
// class runs out, after which that class is sampled with replacement.
inline Partition partition(const LabeledPool& pool, const PartitionSpec& spec, const Graph& graph,
                           Rng& rng) {
  pool.validate();
  const int num_classes = pool.num_classes;
  spec.validate(num_classes);
  const std::size_t k = static_cast<std::size_t>(graph.size());
  if (graph.device_ids.size() != k) throw InputError("graph is missing device ids");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t r = 0; r < pool.labels.size(); ++r) {
    by_class[static_cast<std::size_t>(pool.labels[r])].push_back(r);
  }
  std::vector<detail::ClassSampler> samplers;
  for (int c = 0; c < num_classes; ++c) {
    auto rows = by_class[static_cast<std::size_t>(c)];
    if (rows.empty()) throw InputError("insufficient samples for class " + std::to_string(c));
    std::shuffle(rows.begin(), rows.end(), rng);
    samplers.emplace_back(c, std::move(rows));
  }

  Partition out;
  const auto global_split =
      detail::split_evenly(spec.global_test_size, static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < global_split[static_cast<std::size_t>(c)]; ++i) {
      out.global_test_rows.push_back(samplers[static_cast<std::size_t>(c)].take_reserved());
    }
  }
  for (auto& s : samplers) s.drop_reserved();
  out.global_test = pool.subset(out.global_test_rows);

  std::vector<std::vector<int>> label_sets;
  if (spec.setup == PartitionSetup::cluster_aligned) {
    const int clusters = graph.num_clusters();
    for (const auto& id : graph.device_ids) {
      label_sets.push_back(
          cluster_aligned_labels(num_classes, spec.labels_per_device, clusters, id));
    }
  } else {
    label_sets = detail::random_label_sets(num_classes, spec.labels_per_device, k, rng);
  }

  const std::set<std::size_t> nothing;
  for (std::size_t d = 0; d < k; ++d) {
    DeviceData dev;
    dev.allowed_labels = label_sets[d];
    const auto parts = static_cast<std::size_t>(dev.allowed_labels.size());
    const auto train_split = detail::split_evenly(spec.train_per_device, parts);
    const auto test_split = detail::split_evenly(spec.local_test_per_device, parts);

    std::set<std::size_t> own_train;
    for (std::size_t j = 0; j < parts; ++j) {
      auto& sampler = samplers[static_cast<std::size_t>(dev.allowed_labels[j])];
      for (std::size_t i = 0; i < train_split[j]; ++i) {
        const std::size_t r = sampler.take(rng, nothing);
        dev.train_rows.push_back(r);
        own_train.insert(r);
      }
    }
    for (std::size_t j = 0; j < parts; ++j) {
      auto& sampler = samplers[static_cast<std::size_t>(dev.allowed_labels[j])];
      for (std::size_t i = 0; i < test_split[j]; ++i) {
        dev.local_test_rows.push_back(sampler.take(rng, own_train));
      }
    }
    dev.train = pool.subset(dev.train_rows);
    dev.local_test = pool.subset(dev.local_test_rows);
    out.devices.push_back(std::move(dev));
  }
  return out;
}

// Class-conditional Gaussians: class c centered at separation * u_c for a
// random unit direction u_c, unit covariance. Samples are grouped by class.
inline LabeledPool synth_gaussian_pool(int num_classes, int dim, std::size_t per_class,
                                       double separation, Rng& rng) {
  if (num_classes < 1 || dim < 1 || per_class < 1) {
    throw InputError("synthetic pool needs positive classes, dimension and count");
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw InputError("separation must be finite and nonnegative");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd means(num_classes, dim);
  for (int c = 0; c < num_classes; ++c) {
    Eigen::VectorXd u(dim);
    do {
      for (int j = 0; j < dim; ++j) u(j) = normal(rng);
    } while (u.norm() == 0.0);
    means.row(c) = separation * u.normalized().transpose();
  }

  LabeledPool pool;
  pool.num_classes = num_classes;
  const auto total = static_cast<Eigen::Index>(per_class) * num_classes;
  pool.inputs.resize(total, dim);
  pool.labels.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      for (int j = 0; j < dim; ++j) pool.inputs(row, j) = means(c, j) + normal(rng);
      pool.labels.push_back(c);
    }
  }
  return pool;
}

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw IngestError(path + ": truncated header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

inline std::vector<unsigned char> read_payload(std::istream& in, std::size_t n,
                                               const std::string& path) {
  std::vector<unsigned char> bytes(n);
  if (n > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n))) {
    throw IngestError(path + ": truncated payload, expected " + std::to_string(n) + " bytes");
  }
  return bytes;
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Reads an MNIST-style IDX image/label file pair. Pixels are scaled to [0, 1].
inline LabeledPool load_mnist_idx(const std::filesystem::path& images_path,
                                  const std::filesystem::path& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw IngestError("cannot open " + images_path.string());
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw IngestError("cannot open " + labels_path.string());

  const std::string ip = images_path.string();
  const std::string lp = labels_path.string();
  if (detail::read_be32(images, ip) != kIdxImagesMagic) {
    throw IngestError(ip + ": bad magic number, expected 0x00000803");
  }
  const std::uint32_t count = detail::read_be32(images, ip);
  const std::uint32_t rows = detail::read_be32(images, ip);
  const std::uint32_t cols = detail::read_be32(images, ip);
  if (detail::read_be32(labels, lp) != kIdxLabelsMagic) {
    throw IngestError(lp + ": bad magic number, expected 0x00000801");
  }
  const std::uint32_t label_count = detail::read_be32(labels, lp);
  if (label_count != count) {
    throw IngestError("image count " + std::to_string(count) + " does not match label count " +
                      std::to_string(label_count));
  }
  const std::size_t dim = std::size_t{rows} * cols;
  const auto pixels = detail::read_payload(images, std::size_t{count} * dim, ip);
  const auto raw_labels = detail::read_payload(labels, count, lp);

  LabeledPool pool;
  pool.inputs.resize(count, static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      pool.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          pixels[i * dim + j] / 255.0;
    }
  }
  int max_label = -1;
  for (unsigned char y : raw_labels) {
    pool.labels.push_back(y);
    max_label = std::max<int>(max_label, y);
  }
  pool.num_classes = std::max(max_label + 1, 10);
  return pool;
}

}  // namespace gfl
