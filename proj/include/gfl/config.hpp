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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gfl/datagen.hpp"
#include "gfl/errors.hpp"
#include "gfl/optimizer.hpp"

namespace gfl {

enum class Aggregator { fedavg, gfedfilt };
enum class GraphSource { positions, positions_file, adjacency_file };
enum class DataSource { synthetic, mnist };

struct UniformRange {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const UniformRange&, const UniformRange&) = default;
};

struct GraphConfig {
  GraphSource source = GraphSource::positions;
  int devices = 20;
  int clusters = 4;
  int cluster_min = 4;
  int cluster_max = 7;
  double room_size = 10.0;   // metres, square floor
  double room_height = 3.0;  // metres
  double d_max = 7.5;        // metres
  std::string positions_path;  // cluster_index x y z per line
  std::string adjacency_path;  // K, then K rows of K weights
  std::vector<int> cluster_labels;  // optional, for adjacency_file

  friend bool operator==(const GraphConfig&, const GraphConfig&) = default;
};

struct DataConfig {
  DataSource source = DataSource::synthetic;
  int classes = 10;
  int dim = 16;
  std::size_t per_class = 2500;
  double separation = 3.0;
  std::string mnist_images;
  std::string mnist_labels;
  PartitionSpec partition;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct TrainConfig {
  std::vector<int> hidden{128};
  double eta = 0.05;
  int batch_size = 32;
  int alpha = 3;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct SystemConfig {
  double beta_hz = 20e6;
  double n0_dbm_per_hz = -174.0;
  double varsigma = 1e-28;
  double e_max = 1.0;
  UniformRange rho{1e4, 5e4};
  UniformRange f{1e9, 3.5e9};
  UniformRange p_tran{0.5, 1.0};
  UniformRange xi_db{1.0, 2.0};
  std::string specs_path;  // rho f p_tran xi_db per line; overrides sampling

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

struct SweepConfig {
  std::vector<double> mu_s_values{0.1, 1.0, 10.0, 100.0};
  std::vector<Aggregator> aggregators{Aggregator::fedavg, Aggregator::gfedfilt};

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct ExperimentConfig {
  int rounds = 200;
  Aggregator aggregator = Aggregator::gfedfilt;
  double mu_s = 1.0;
  bool optimize = false;
  std::uint64_t seed = 1;
  GraphConfig graph;
  DataConfig data;
  TrainConfig model;
  SystemConfig system;
  ScheduleBounds schedule;
  SweepConfig sweep;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline const char* to_string(Aggregator a) { return a == Aggregator::fedavg ? "fedavg" : "gfedfilt"; }

inline const char* to_string(GraphSource s) {
  switch (s) {
    case GraphSource::positions: return "positions";
    case GraphSource::positions_file: return "positions_file";
    case GraphSource::adjacency_file: return "adjacency_file";
  }
  return "";
}

inline const char* to_string(DataSource s) { return s == DataSource::synthetic ? "synthetic" : "mnist"; }

inline const char* to_string(PartitionSetup s) {
  return s == PartitionSetup::cluster_aligned ? "cluster_aligned" : "random";
}

inline Aggregator parse_aggregator(const std::string& s) {
  if (s == "fedavg") return Aggregator::fedavg;
  if (s == "gfedfilt") return Aggregator::gfedfilt;
  throw InputError("unknown aggregator '" + s + "' (expected fedavg or gfedfilt)");
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else if constexpr (std::is_same_v<T, Aggregator>) {
      out += to_string(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

// Reads typed values out of one INI tree and remembers which keys were used.
class IniReader {
 public:
  explicit IniReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  template <class Fn>
  void with(const std::string& section, const std::string& key, Fn&& fn) {
    const std::string path = section + "." + key;
    seen_.insert(path);
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return;
    const auto value = sec->get_optional<std::string>(key);
    if (!value) return;
    try {
      fn(*value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(path, e.what());
    }
  }

  void read(const std::string& s, const std::string& k, double& out) {
    with(s, k, [&](const std::string& v) { out = to_double(v); });
  }
  void read(const std::string& s, const std::string& k, int& out) {
    with(s, k, [&](const std::string& v) { out = static_cast<int>(to_int(v)); });
  }
  void read(const std::string& s, const std::string& k, std::size_t& out) {
    with(s, k, [&](const std::string& v) {
      const long long x = to_int(v);
      if (x < 0) throw InputError("expected a nonnegative count");
      out = static_cast<std::size_t>(x);
    });
  }
  void read_u64(const std::string& s, const std::string& k, std::uint64_t& out) {
    with(s, k, [&](const std::string& v) {
      std::size_t pos = 0;
      out = std::stoull(v, &pos);
      if (pos != v.size() || v.front() == '-') throw InputError("expected an unsigned integer");
    });
  }
  void read(const std::string& s, const std::string& k, bool& out) {
    with(s, k, [&](const std::string& v) {
      if (v == "true" || v == "on" || v == "1") {
        out = true;
      } else if (v == "false" || v == "off" || v == "0") {
        out = false;
      } else {
        throw InputError("expected on/off or true/false");
      }
    });
  }
  void read(const std::string& s, const std::string& k, std::string& out) {
    with(s, k, [&](const std::string& v) { out = v; });
  }
  void read(const std::string& s, const std::string& k, UniformRange& out) {
    with(s, k, [&](const std::string& v) {
      const auto parts = split_list(v);
      if (parts.size() != 2) throw InputError("expected 'lo, hi'");
      out = {to_double(parts[0]), to_double(parts[1])};
    });
  }
  void read(const std::string& s, const std::string& k, std::vector<int>& out) {
    with(s, k, [&](const std::string& v) {
      out.clear();
      for (const auto& p : split_list(v)) out.push_back(static_cast<int>(to_int(p)));
    });
  }
  void read(const std::string& s, const std::string& k, std::vector<double>& out) {
    with(s, k, [&](const std::string& v) {
      out.clear();
      for (const auto& p : split_list(v)) out.push_back(to_double(p));
    });
  }

  // Every key present in the file must have been read.
  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) {
        throw ConfigError(section, "keys must live inside a [section]");
      }
      for (const auto& [key, value] : body) {
        const std::string path = section + "." + key;
        if (!seen_.count(path)) throw ConfigError(path, "unknown key");
      }
    }
  }

 private:
  static double to_double(const std::string& v) {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw InputError("trailing characters in number");
    return x;
  }
  static long long to_int(const std::string& v) {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw InputError("expected an integer");
    return x;
  }

  const boost::property_tree::ptree& tree_;
  std::set<std::string> seen_;
};

template <class Check>
void check_key(const char* path, Check&& ok, const char* what) {
  if (!ok()) throw ConfigError(path, what);
}

}  // namespace detail

// Eager validation of everything the experiment will touch.
inline void validate(const ExperimentConfig& c) {
  using detail::check_key;
  check_key("experiment.rounds", [&] { return c.rounds >= 1; }, "must be at least 1");
  check_key("experiment.mu_s", [&] { return std::isfinite(c.mu_s) && c.mu_s >= 0.0; },
            "must be finite and nonnegative");

  const auto& g = c.graph;
  check_key("graph.devices", [&] { return g.devices >= 1; }, "must be at least 1");
  check_key("graph.clusters", [&] { return g.clusters >= 1; }, "must be at least 1");
  check_key("graph.cluster_min", [&] { return g.cluster_min >= 1 && g.cluster_min <= g.cluster_max; },
            "must satisfy 1 <= cluster_min <= cluster_max");
  if (g.source == GraphSource::positions) {
    check_key("graph.devices",
              [&] {
                return g.devices >= g.clusters * g.cluster_min &&
                       g.devices <= g.clusters * g.cluster_max;
              },
              "cannot be split into clusters of the configured sizes");
  }
  check_key("graph.room_size", [&] { return g.room_size > 0.0 && std::isfinite(g.room_size); },
            "must be positive");
  check_key("graph.room_height", [&] { return g.room_height >= 0.0 && std::isfinite(g.room_height); },
            "must be nonnegative");
  check_key("graph.d_max", [&] { return g.d_max > 0.0 && std::isfinite(g.d_max); }, "must be positive");
  check_key("graph.positions_path",
            [&] { return g.source != GraphSource::positions_file || !g.positions_path.empty(); },
            "required when source = positions_file");
  check_key("graph.adjacency_path",
            [&] { return g.source != GraphSource::adjacency_file || !g.adjacency_path.empty(); },
            "required when source = adjacency_file");

  const auto& d = c.data;
  check_key("data.classes", [&] { return d.classes >= 2; }, "must be at least 2");
  check_key("data.dim", [&] { return d.dim >= 1; }, "must be at least 1");
  check_key("data.per_class", [&] { return d.per_class >= 1; }, "must be at least 1");
  check_key("data.separation", [&] { return d.separation >= 0.0 && std::isfinite(d.separation); },
            "must be finite and nonnegative");
  check_key("data.mnist_images",
            [&] { return d.source != DataSource::mnist || (!d.mnist_images.empty() && !d.mnist_labels.empty()); },
            "mnist_images and mnist_labels are required when source = mnist");
  try {
    d.partition.validate(d.classes);
  } catch (const InputError& e) {
    throw ConfigError("data.labels_per_device", e.what());
  }

  const auto& m = c.model;
  check_key("model.hidden",
            [&] {
              for (int h : m.hidden) {
                if (h < 1) return false;
              }
              return true;
            },
            "layer widths must be positive");
  check_key("model.eta", [&] { return m.eta >= 0.0 && std::isfinite(m.eta); }, "must be finite and nonnegative");
  check_key("model.batch_size", [&] { return m.batch_size >= 1; }, "must be at least 1");
  check_key("model.alpha", [&] { return m.alpha >= 1; }, "must be at least 1");

  const auto& s = c.system;
  check_key("system.beta_hz", [&] { return s.beta_hz > 0.0 && std::isfinite(s.beta_hz); }, "must be positive");
  check_key("system.n0_dbm_per_hz", [&] { return std::isfinite(s.n0_dbm_per_hz); }, "must be finite");
  check_key("system.varsigma", [&] { return s.varsigma > 0.0; }, "must be positive");
  check_key("system.e_max", [&] { return s.e_max > 0.0; }, "must be positive");
  auto range_ok = [](const UniformRange& r, bool positive) {
    return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi && (!positive || r.lo > 0.0);
  };
  check_key("system.rho", [&] { return range_ok(s.rho, true); }, "needs 0 < lo <= hi");
  check_key("system.f", [&] { return range_ok(s.f, true); }, "needs 0 < lo <= hi");
  check_key("system.p_tran", [&] { return range_ok(s.p_tran, true); }, "needs 0 < lo <= hi");
  check_key("system.xi_db", [&] { return range_ok(s.xi_db, false); }, "needs lo <= hi");

  const auto& b = c.schedule;
  check_key("schedule.alpha_min", [&] { return b.alpha_min >= 1 && b.alpha_min <= b.alpha_max; },
            "must satisfy 1 <= alpha_min <= alpha_max");
  check_key("schedule.q_min", [&] { return b.q_min > 0.0 && b.q_min <= 1.0; }, "must lie in (0, 1]");
  check_key("schedule.z_min", [&] { return b.z_min > 0.0 && b.z_min <= 1.0; }, "must lie in (0, 1]");
  check_key("schedule.mu1",
            [&] {
              return b.mu1 >= 0.0 && b.mu2 >= 0.0 && b.mu3 >= 0.0 &&
                     std::abs(b.mu1 + b.mu2 + b.mu3 - 1.0) <= 1e-9;
            },
            "mu1, mu2, mu3 must be nonnegative and sum to 1");
  check_key("schedule.q_min",
            [&] { return b.q_min * static_cast<double>(d.partition.train_per_device) >= 1.0 - 1e-9; },
            "q_min * train_per_device must be at least 1");

  for (double mu : c.sweep.mu_s_values) {
    check_key("sweep.mu_s_values", [&] { return std::isfinite(mu) && mu >= 0.0; },
              "values must be finite and nonnegative");
  }
}

inline ExperimentConfig config_from_tree(const boost::property_tree::ptree& tree) {
  ExperimentConfig c;
  detail::IniReader r(tree);

  r.read("experiment", "rounds", c.rounds);
  r.with("experiment", "aggregator", [&](const std::string& v) { c.aggregator = parse_aggregator(v); });
  r.read("experiment", "mu_s", c.mu_s);
  r.read("experiment", "optimize", c.optimize);
  r.read_u64("experiment", "seed", c.seed);

  auto& g = c.graph;
  r.with("graph", "source", [&](const std::string& v) {
    if (v == "positions") {
      g.source = GraphSource::positions;
    } else if (v == "positions_file") {
      g.source = GraphSource::positions_file;
    } else if (v == "adjacency_file") {
      g.source = GraphSource::adjacency_file;
    } else {
      throw InputError("expected positions, positions_file or adjacency_file");
    }
  });
  r.read("graph", "devices", g.devices);
  r.read("graph", "clusters", g.clusters);
  r.read("graph", "cluster_min", g.cluster_min);
  r.read("graph", "cluster_max", g.cluster_max);
  r.read("graph", "room_size", g.room_size);
  r.read("graph", "room_height", g.room_height);
  r.read("graph", "d_max", g.d_max);
  r.read("graph", "positions_path", g.positions_path);
  r.read("graph", "adjacency_path", g.adjacency_path);
  r.read("graph", "cluster_labels", g.cluster_labels);

  auto& d = c.data;
  r.with("data", "source", [&](const std::string& v) {
    if (v == "synthetic") {
      d.source = DataSource::synthetic;
    } else if (v == "mnist") {
      d.source = DataSource::mnist;
    } else {
      throw InputError("expected synthetic or mnist");
    }
  });
  r.read("data", "classes", d.classes);
  r.read("data", "dim", d.dim);
  r.read("data", "per_class", d.per_class);
  r.read("data", "separation", d.separation);
  r.read("data", "mnist_images", d.mnist_images);
  r.read("data", "mnist_labels", d.mnist_labels);
  r.read("data", "labels_per_device", d.partition.labels_per_device);
  r.read("data", "train_per_device", d.partition.train_per_device);
  r.read("data", "local_test_per_device", d.partition.local_test_per_device);
  r.read("data", "global_test_size", d.partition.global_test_size);
  r.with("data", "setup", [&](const std::string& v) {
    if (v == "cluster_aligned") {
      d.partition.setup = PartitionSetup::cluster_aligned;
    } else if (v == "random") {
      d.partition.setup = PartitionSetup::random;
    } else {
      throw InputError("expected cluster_aligned or random");
    }
  });

  r.read("model", "hidden", c.model.hidden);
  r.read("model", "eta", c.model.eta);
  r.read("model", "batch_size", c.model.batch_size);
  r.read("model", "alpha", c.model.alpha);

  auto& s = c.system;
  r.read("system", "beta_hz", s.beta_hz);
  r.read("system", "n0_dbm_per_hz", s.n0_dbm_per_hz);
  r.read("system", "varsigma", s.varsigma);
  r.read("system", "e_max", s.e_max);
  r.read("system", "rho", s.rho);
  r.read("system", "f", s.f);
  r.read("system", "p_tran", s.p_tran);
  r.read("system", "xi_db", s.xi_db);
  r.read("system", "specs_path", s.specs_path);

  auto& b = c.schedule;
  r.read("schedule", "alpha_min", b.alpha_min);
  r.read("schedule", "alpha_max", b.alpha_max);
  r.read("schedule", "q_min", b.q_min);
  r.read("schedule", "z_min", b.z_min);
  r.read("schedule", "mu1", b.mu1);
  r.read("schedule", "mu2", b.mu2);
  r.read("schedule", "mu3", b.mu3);

  r.read("sweep", "mu_s_values", c.sweep.mu_s_values);
  r.with("sweep", "aggregators", [&](const std::string& v) {
    c.sweep.aggregators.clear();
    for (const auto& p : detail::split_list(v)) c.sweep.aggregators.push_back(parse_aggregator(p));
  });

  r.reject_unknown();
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("<file>", e.message() + " at line " + std::to_string(e.line()));
  }
  return config_from_tree(tree);
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

// Writes every key, so the output alone reproduces the configuration.
inline std::string write_config(const ExperimentConfig& c) {
  using detail::format_double;
  using detail::join;
  std::ostringstream o;
  auto range = [](const UniformRange& r) { return format_double(r.lo) + "," + format_double(r.hi); };
  o << "[experiment]\n"
    << "rounds=" << c.rounds << "\n"
    << "aggregator=" << to_string(c.aggregator) << "\n"
    << "mu_s=" << format_double(c.mu_s) << "\n"
    << "optimize=" << (c.optimize ? "on" : "off") << "\n"
    << "seed=" << c.seed << "\n\n";
  const auto& g = c.graph;
  o << "[graph]\n"
    << "source=" << to_string(g.source) << "\n"
    << "devices=" << g.devices << "\n"
    << "clusters=" << g.clusters << "\n"
    << "cluster_min=" << g.cluster_min << "\n"
    << "cluster_max=" << g.cluster_max << "\n"
    << "room_size=" << format_double(g.room_size) << "\n"
    << "room_height=" << format_double(g.room_height) << "\n"
    << "d_max=" << format_double(g.d_max) << "\n"
    << "positions_path=" << g.positions_path << "\n"
    << "adjacency_path=" << g.adjacency_path << "\n"
    << "cluster_labels=" << join(g.cluster_labels) << "\n\n";
  const auto& d = c.data;
  o << "[data]\n"
    << "source=" << to_string(d.source) << "\n"
    << "classes=" << d.classes << "\n"
    << "dim=" << d.dim << "\n"
    << "per_class=" << d.per_class << "\n"
    << "separation=" << format_double(d.separation) << "\n"
    << "mnist_images=" << d.mnist_images << "\n"
    << "mnist_labels=" << d.mnist_labels << "\n"
    << "labels_per_device=" << d.partition.labels_per_device << "\n"
    << "train_per_device=" << d.partition.train_per_device << "\n"
    << "local_test_per_device=" << d.partition.local_test_per_device << "\n"
    << "global_test_size=" << d.partition.global_test_size << "\n"
    << "setup=" << to_string(d.partition.setup) << "\n\n";
  o << "[model]\n"
    << "hidden=" << join(c.model.hidden) << "\n"
    << "eta=" << format_double(c.model.eta) << "\n"
    << "batch_size=" << c.model.batch_size << "\n"
    << "alpha=" << c.model.alpha << "\n\n";
  const auto& s = c.system;
  o << "[system]\n"
    << "beta_hz=" << format_double(s.beta_hz) << "\n"
    << "n0_dbm_per_hz=" << format_double(s.n0_dbm_per_hz) << "\n"
    << "varsigma=" << format_double(s.varsigma) << "\n"
    << "e_max=" << format_double(s.e_max) << "\n"
    << "rho=" << range(s.rho) << "\n"
    << "f=" << range(s.f) << "\n"
    << "p_tran=" << range(s.p_tran) << "\n"
    << "xi_db=" << range(s.xi_db) << "\n"
    << "specs_path=" << s.specs_path << "\n\n";
  const auto& b = c.schedule;
  o << "[schedule]\n"
    << "alpha_min=" << b.alpha_min << "\n"
    << "alpha_max=" << b.alpha_max << "\n"
    << "q_min=" << format_double(b.q_min) << "\n"
    << "z_min=" << format_double(b.z_min) << "\n"
    << "mu1=" << format_double(b.mu1) << "\n"
    << "mu2=" << format_double(b.mu2) << "\n"
    << "mu3=" << format_double(b.mu3) << "\n\n";
  o << "[sweep]\n"
    << "mu_s_values=" << join(c.sweep.mu_s_values) << "\n"
    << "aggregators=" << join(c.sweep.aggregators) << "\n";
  return o.str();
}

}  // namespace gfl
