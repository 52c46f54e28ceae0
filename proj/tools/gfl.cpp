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

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "gfl/config.hpp"
#include "gfl/engine.hpp"
#include "gfl/report.hpp"
#include "gfl/verify.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  std::string aggregator;
  std::optional<double> mu_s;
  std::string optimize;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--rounds", o.rounds, "number of communication rounds");
  cmd->add_option("--aggregator", o.aggregator, "fedavg or gfedfilt")
      ->check(CLI::IsMember({"fedavg", "gfedfilt"}));
  cmd->add_option("--mu-s", o.mu_s, "graph filter parameter");
  cmd->add_option("--optimize", o.optimize, "per-round scheduling")->check(CLI::IsMember({"on", "off"}));
}

gfl::ExperimentConfig resolve(const Overrides& o) {
  gfl::ExperimentConfig c = o.config.empty() ? gfl::ExperimentConfig{} : gfl::parse_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.rounds) c.rounds = *o.rounds;
  if (!o.aggregator.empty()) c.aggregator = gfl::parse_aggregator(o.aggregator);
  if (o.mu_s) c.mu_s = *o.mu_s;
  if (!o.optimize.empty()) c.optimize = o.optimize == "on";
  gfl::validate(c);
  return c;
}

void run_one(const gfl::ExperimentConfig& c, const gfl::OutputPaths& paths) {
  gfl::write_manifest(c, paths);
  gfl::Simulation sim(c, gfl::build_world(c));
  for (int r = 0; r < c.rounds; ++r) {
    const auto& rec = sim.run_round();
    if ((r + 1) % 10 == 0 || r + 1 == c.rounds) {
      std::fprintf(stderr, "round %d  local %.4f  global %.4f  T %.4g\n", rec.round,
                   rec.acc_local.mean, rec.acc_global.mean, rec.t_round);
    }
  }
  gfl::write_results(c, sim.log(), paths);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-filtered federated learning simulator"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, run_opts);

  Overrides sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "grid over mu_s and aggregator");
  add_common(sweep, sweep_opts);

  std::uint64_t verify_seed = 7;
  auto* verify = app.add_subcommand("verify", "check solvers against reference oracles");
  verify->add_option("--seed", verify_seed, "seed for the random instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto c = resolve(run_opts);
      run_one(c, gfl::OutputPaths::in(run_opts.out));
    } else if (*sweep) {
      const auto base = resolve(sweep_opts);
      for (const auto agg : base.sweep.aggregators) {
        if (agg == gfl::Aggregator::fedavg) {
          auto c = base;
          c.aggregator = agg;
          run_one(c, gfl::OutputPaths::in(sweep_opts.out, "fedavg"));
          continue;
        }
        for (double mu : base.sweep.mu_s_values) {
          auto c = base;
          c.aggregator = agg;
          c.mu_s = mu;
          run_one(c, gfl::OutputPaths::in(sweep_opts.out, "gfedfilt_mu" + gfl::fmt6(mu)));
        }
      }
    } else if (*verify) {
      bool ok = true;
      for (const auto& r : gfl::run_verification(verify_seed)) {
        std::printf("%s %s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        ok = ok && r.pass;
      }
      return ok ? 0 : 1;
    }
  } catch (const gfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
