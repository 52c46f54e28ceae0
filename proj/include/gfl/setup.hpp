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

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gfl/config.hpp"
#include "gfl/datagen.hpp"
#include "gfl/errors.hpp"
#include "gfl/graph.hpp"
#include "gfl/learner.hpp"
#include "gfl/rng.hpp"
#include "gfl/sysmodel.hpp"

namespace gfl {

// Whitespace-separated numbers, one row per non-empty line; '#' starts a
// comment.
inline std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string cell;
    while (ls >> cell) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw IngestError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

// K lines of `cluster_index x y z`.
inline Graph read_positions_graph(const std::filesystem::path& path, double d_max) {
  const auto rows = read_numeric_rows(path);
  Positions pos(static_cast<Eigen::Index>(rows.size()), 3);
  std::vector<int> clusters;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 4) {
      throw IngestError(path.string() + ": row " + std::to_string(i + 1) + " needs cluster_index x y z");
    }
    clusters.push_back(static_cast<int>(rows[i][0]));
    for (int c = 0; c < 3; ++c) {
      pos(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c + 1)];
    }
  }
  return build_adjacency_from_positions(pos, d_max, std::move(clusters));
}

// First line K, then K lines of K weights.
inline Graph read_adjacency_graph(const std::filesystem::path& path, std::vector<int> clusters) {
  const auto rows = read_numeric_rows(path);
  if (rows.empty() || rows[0].size() != 1 || rows[0][0] < 1 || rows[0][0] != std::floor(rows[0][0])) {
    throw IngestError(path.string() + ": first line must hold the device count K");
  }
  const auto k = static_cast<Eigen::Index>(rows[0][0]);
  if (static_cast<Eigen::Index>(rows.size()) != k + 1) {
    throw IngestError(path.string() + ": expected " + std::to_string(k) + " matrix rows");
  }
  Matrix a(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i + 1)];
    if (static_cast<Eigen::Index>(row.size()) != k) {
      throw IngestError(path.string() + ": row " + std::to_string(i + 1) + " needs " +
                        std::to_string(k) + " weights");
    }
    for (Eigen::Index j = 0; j < k; ++j) a(i, j) = row[static_cast<std::size_t>(j)];
  }
  return make_graph(std::move(a), std::move(clusters));
}

// K lines of `rho f p_tran xi_db`. Bandwidth, capacitance and energy budget come
// from the system config.
inline std::vector<DeviceSpec> read_device_specs(const std::filesystem::path& path,
                                                 const SystemConfig& sys, int devices) {
  const auto rows = read_numeric_rows(path);
  if (static_cast<int>(rows.size()) != devices) {
    throw IngestError(path.string() + ": expected " + std::to_string(devices) + " device rows, got " +
                      std::to_string(rows.size()));
  }
  std::vector<DeviceSpec> specs;
  for (const auto& r : rows) {
    if (r.size() != 4) throw IngestError(path.string() + ": each row needs rho,f,p_tran,xi_db");
    DeviceSpec s{r[0], r[1], r[2], r[3], sys.beta_hz / devices, sys.varsigma, sys.e_max};
    s.validate();
    specs.push_back(s);
  }
  return specs;
}

namespace detail {

inline double draw(const UniformRange& r, Rng& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace detail

// rho, f, p and xi drawn from their uniform ranges; b = beta / K.
inline std::vector<DeviceSpec> sample_device_specs(std::uint64_t seed, int devices,
                                                   const SystemConfig& sys) {
  if (devices < 1) throw InputError("need at least one device");
  Rng rng = make_rng(seed, Stream::specs);
  std::vector<DeviceSpec> specs;
  specs.reserve(static_cast<std::size_t>(devices));
  for (int i = 0; i < devices; ++i) {
    DeviceSpec s;
    s.rho = detail::draw(sys.rho, rng);
    s.f = detail::draw(sys.f, rng);
    s.p_tran = detail::draw(sys.p_tran, rng);
    s.xi_db = detail::draw(sys.xi_db, rng);
    s.b = sys.beta_hz / devices;
    s.varsigma = sys.varsigma;
    s.e_max = sys.e_max;
    s.validate();
    specs.push_back(s);
  }
  return specs;
}

// Cluster sizes drawn uniformly from [lo, hi] until they add up to K.
inline std::vector<int> sample_cluster_sizes(int devices, int clusters, int lo, int hi, Rng& rng) {
  if (devices < clusters * lo || devices > clusters * hi) {
    throw InputError("cannot split " + std::to_string(devices) + " devices into " +
                     std::to_string(clusters) + " clusters of size [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  }
  std::uniform_int_distribution<int> size(lo, hi);
  std::vector<int> sizes(static_cast<std::size_t>(clusters));
  for (int attempt = 0; attempt < 100000; ++attempt) {
    for (int& s : sizes) s = size(rng);
    if (std::accumulate(sizes.begin(), sizes.end(), 0) == devices) return sizes;
  }
  throw InputError("cluster size sampling did not converge");
}

// One room per cluster, rooms side by side along x; devices uniform inside
// their room. Redrawn until the proximity graph is connected.
inline Graph sample_room_graph(const GraphConfig& g, Rng& rng) {
  const auto sizes = sample_cluster_sizes(g.devices, g.clusters, g.cluster_min, g.cluster_max, rng);
  std::vector<int> clusters;
  for (int c = 0; c < g.clusters; ++c) {
    clusters.insert(clusters.end(), static_cast<std::size_t>(sizes[static_cast<std::size_t>(c)]), c);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Positions pos(g.devices, 3);
    for (int i = 0; i < g.devices; ++i) {
      const int c = clusters[static_cast<std::size_t>(i)];
      pos(i, 0) = (c + unit(rng)) * g.room_size;
      pos(i, 1) = unit(rng) * g.room_size;
      pos(i, 2) = unit(rng) * g.room_height;
    }
    Graph graph = build_adjacency_from_positions(pos, g.d_max, clusters);
    if (is_connected(graph)) return graph;
  }
  throw InputError("no connected layout found; increase graph.d_max");
}

inline Graph build_graph(const ExperimentConfig& c) {
  switch (c.graph.source) {
    case GraphSource::positions: {
      Rng rng = make_rng(c.seed, Stream::graph);
      return sample_room_graph(c.graph, rng);
    }
    case GraphSource::positions_file:
      return read_positions_graph(c.graph.positions_path, c.graph.d_max);
    case GraphSource::adjacency_file:
      return read_adjacency_graph(c.graph.adjacency_path, c.graph.cluster_labels);
  }
  throw InputError("unknown graph source");
}

inline LabeledPool build_pool(const ExperimentConfig& c) {
  if (c.data.source == DataSource::mnist) {
    return load_mnist_idx(c.data.mnist_images, c.data.mnist_labels);
  }
  Rng rng = make_rng(c.seed, Stream::data);
  return synth_gaussian_pool(c.data.classes, c.data.dim, c.data.per_class, c.data.separation, rng);
}

inline ModelConfig model_config(const ExperimentConfig& c, int input_dim, int num_classes) {
  ModelConfig m;
  m.layer_sizes.push_back(input_dim);
  for (int h : c.model.hidden) m.layer_sizes.push_back(h);
  m.layer_sizes.push_back(num_classes);
  m.seed = derive_seed(c.seed, Stream::device_init);
  return m;
}

// Everything an experiment needs before its first round.
struct World {
  Graph graph;
  Spectrum spectrum;
  Partition data;
  std::vector<DeviceSpec> specs;
  ModelConfig model;
};

inline World build_world(const ExperimentConfig& c) {
  validate(c);
  World w;
  w.graph = build_graph(c);
  if (w.graph.size() != c.graph.devices) {
    throw ConfigError("graph.devices", "graph file has " + std::to_string(w.graph.size()) + " devices");
  }
  w.spectrum = eigendecompose(laplacian(w.graph));
  const LabeledPool pool = build_pool(c);
  Rng prng = make_rng(c.seed, Stream::partition);
  w.data = partition(pool, c.data.partition, w.graph, prng);
  w.specs = c.system.specs_path.empty()
                ? sample_device_specs(c.seed, c.graph.devices, c.system)
                : read_device_specs(c.system.specs_path, c.system, c.graph.devices);
  w.model = model_config(c, static_cast<int>(pool.dim()), pool.num_classes);
  return w;
}

}  // namespace gfl
