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

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gfl/config.hpp"
#include "gfl/engine.hpp"
#include "gfl/errors.hpp"

namespace gfl {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr const char* kMetricsHeader =
    "round,acc_local_mean,acc_local_std,acc_global_mean,acc_global_std,"
    "I1,I2,I3,I4,I5,I6,I7,T,H";

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string metrics_csv(const MetricsLog& log) {
  std::ostringstream o;
  o << kMetricsHeader << "\n";
  for (const auto& r : log.rounds) {
    const double cols[] = {r.acc_local.mean, r.acc_local.std, r.acc_global.mean, r.acc_global.std,
                           r.indices.accuracy, r.indices.precision, r.indices.recall, r.indices.f1,
                           r.flops, r.latency, r.desync, r.t_round, r.heterogeneity};
    o << r.round;
    for (double c : cols) o << "," << fmt6(c);
    o << "\n";
  }
  return o.str();
}

// Per-device knobs of the last round.
inline std::string plan_csv(const MetricsLog& log) {
  std::ostringstream o;
  o << "device,alpha,q,z,n_samples,payload_bits,tau,energy,local_acc,global_acc\n";
  if (log.rounds.empty()) return o.str();
  const auto& r = log.rounds.back();
  for (std::size_t i = 0; i < r.devices.size(); ++i) {
    const auto& d = r.devices[i];
    o << i << "," << d.alpha << "," << fmt6(d.q) << "," << fmt6(d.z) << "," << d.n_samples << ","
      << fmt6(d.payload_bits) << "," << fmt6(d.tau) << "," << fmt6(d.energy) << ","
      << fmt6(r.local_accuracy[i]) << "," << fmt6(r.global_accuracy[i]) << "\n";
  }
  return o.str();
}

inline nlohmann::json summary_json(const ExperimentConfig& c, const MetricsLog& log) {
  nlohmann::json j;
  j["rounds"] = log.rounds.size();
  j["aggregator"] = to_string(c.aggregator);
  j["mu_s"] = c.mu_s;
  j["optimize"] = c.optimize;
  j["seed"] = c.seed;
  if (!log.rounds.empty()) {
    const auto& r = log.rounds.back();
    j["final"] = {
        {"acc_local_mean", r.acc_local.mean}, {"acc_local_std", r.acc_local.std},
        {"acc_global_mean", r.acc_global.mean}, {"acc_global_std", r.acc_global.std},
        {"I1", r.indices.accuracy}, {"I2", r.indices.precision}, {"I3", r.indices.recall},
        {"I4", r.indices.f1}, {"I5", r.flops}, {"I6", r.latency}, {"I7", r.desync},
        {"T", r.t_round}, {"T_opt", r.t_opt}, {"H", r.heterogeneity},
    };
  }
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write " + path.string());
  out << text;
  if (!out) throw IngestError("write failed for " + path.string());
}

struct OutputPaths {
  std::filesystem::path dir;
  std::filesystem::path config;
  std::filesystem::path manifest;
  std::filesystem::path metrics;
  std::filesystem::path summary;
  std::filesystem::path devices;

  static OutputPaths in(const std::filesystem::path& dir, const std::string& stem = "") {
    const std::string p = stem.empty() ? "" : stem + "_";
    return {dir, dir / (p + "config.ini"), dir / (p + "manifest.json"), dir / (p + "metrics.csv"),
            dir / (p + "summary.json"), dir / (p + "devices.csv")};
  }
};

// Written before the first round: the resolved config plus every path the
// run will produce.
inline nlohmann::json manifest_json(const ExperimentConfig& c, const OutputPaths& paths) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["seed"] = c.seed;
  j["config_ini"] = write_config(c);
  j["outputs"] = {{"config", paths.config.string()},   {"manifest", paths.manifest.string()},
                  {"metrics", paths.metrics.string()}, {"summary", paths.summary.string()},
                  {"devices", paths.devices.string()}};
  return j;
}

inline void write_manifest(const ExperimentConfig& c, const OutputPaths& paths) {
  std::error_code ec;
  std::filesystem::create_directories(paths.dir, ec);
  if (ec) throw IngestError("cannot create " + paths.dir.string() + ": " + ec.message());
  write_text(paths.config, write_config(c));
  write_text(paths.manifest, manifest_json(c, paths).dump(2) + "\n");
}

inline void write_results(const ExperimentConfig& c, const MetricsLog& log, const OutputPaths& paths) {
  write_text(paths.metrics, metrics_csv(log));
  write_text(paths.summary, summary_json(c, log).dump(2) + "\n");
  write_text(paths.devices, plan_csv(log));
}

}  // namespace gfl
