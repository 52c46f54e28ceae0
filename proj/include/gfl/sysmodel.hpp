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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gfl/errors.hpp"

namespace gfl {

// Hardware and link parameters of one device. Units: rho cycles/sample,
// f cycles/s, p_tran W, xi_db dB, b Hz, varsigma effective switched
// capacitance, e_max J per round.
struct DeviceSpec {
  double rho = 1e4;
  double f = 1e9;
  double p_tran = 0.5;
  double xi_db = 0.0;
  double b = 1e6;
  double varsigma = 1e-28;
  double e_max = 1.0;

  void validate() const {
    const double fields[] = {rho, f, p_tran, b, varsigma, e_max};
    for (double v : fields) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw InputError("device spec fields must be finite and strictly positive");
      }
    }
    if (!std::isfinite(xi_db)) throw InputError("channel gain must be finite");
  }

  double channel_gain() const { return std::pow(10.0, xi_db / 10.0); }

  friend bool operator==(const DeviceSpec&, const DeviceSpec&) = default;
};

inline double dbm_per_hz_to_watts_per_hz(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double comp_delay(const DeviceSpec& spec, int alpha, double n_samples) {
  if (alpha < 0 || n_samples < 0.0) throw InputError("alpha and sample count must be nonnegative");
  return alpha * n_samples * spec.rho / spec.f;
}

inline double comp_energy(const DeviceSpec& spec, int alpha, double n_samples) {
  if (alpha < 0 || n_samples < 0.0) throw InputError("alpha and sample count must be nonnegative");
  return spec.varsigma * alpha * n_samples * spec.rho * spec.f * spec.f;
}

// Shannon rate of the OFDMA sub-band, bits/s.
inline double tran_rate(const DeviceSpec& spec, double n0_dbm_per_hz) {
  if (!(spec.b > 0.0)) throw InputError("bandwidth must be positive");
  const double n0 = dbm_per_hz_to_watts_per_hz(n0_dbm_per_hz);
  const double snr = spec.channel_gain() * spec.p_tran / (n0 * spec.b);
  if (!(snr > 0.0) || !std::isfinite(snr)) {
    throw NumericalError("signal-to-noise ratio must be positive and finite");
  }
  return spec.b * std::log2(1.0 + snr);
}

inline double tran_delay(double payload_bits, double rate) {
  if (payload_bits < 0.0) throw InputError("payload must be nonnegative");
  if (payload_bits == 0.0) return 0.0;
  if (!(rate > 0.0)) throw InputError("rate must be positive");
  return payload_bits / rate;
}

inline double tran_energy(const DeviceSpec& spec, double tau_tran) { return spec.p_tran * tau_tran; }

inline constexpr double kValueBits = 32.0;
inline constexpr double kIndexBits = 32.0;

// Number of gradient entries kept at sparsity fraction z: ceil(z * B).
inline std::int64_t kept_entries(std::int64_t parameter_count, double z) {
  if (!(z > 0.0) || z > 1.0) throw InputError("sparsity fraction z must lie in (0, 1]");
  if (parameter_count < 1) throw InputError("parameter count must be positive");
  const double raw = z * static_cast<double>(parameter_count);
  const auto k = static_cast<std::int64_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::int64_t>(k, 1, parameter_count);
}

// Wire size of a gradient with B entries at sparsity z: dense float32 for
// z = 1, (index, value) pairs otherwise.
inline double payload_size(std::int64_t parameter_count, double z) {
  if (z == 1.0) {
    if (parameter_count < 1) throw InputError("parameter count must be positive");
    return kValueBits * static_cast<double>(parameter_count);
  }
  return (kValueBits + kIndexBits) * static_cast<double>(kept_entries(parameter_count, z));
}

struct RoundCosts {
  double tau_comp = 0.0;
  double tau_tran = 0.0;
  double e_comp = 0.0;
  double e_tran = 0.0;
  double tau_total = 0.0;

  double energy() const { return e_comp + e_tran; }
};

inline RoundCosts round_costs(const DeviceSpec& spec, int alpha, double n_samples,
                              double payload_bits, double n0_dbm_per_hz) {
  RoundCosts c;
  c.tau_comp = comp_delay(spec, alpha, n_samples);
  c.e_comp = comp_energy(spec, alpha, n_samples);
  c.tau_tran = tran_delay(payload_bits, tran_rate(spec, n0_dbm_per_hz));
  c.e_tran = tran_energy(spec, c.tau_tran);
  c.tau_total = c.tau_comp + c.tau_tran;
  return c;
}

// H = 1 - (1/K) sum_i min(tau) / tau_i.
inline double heterogeneity_from_latencies(std::span<const double> latencies) {
  if (latencies.empty()) throw InputError("need at least one device");
  const double fastest = *std::min_element(latencies.begin(), latencies.end());
  double sum = 0.0;
  for (double t : latencies) {
    if (!(t > 0.0)) throw InputError("latencies must be positive");
    sum += fastest / t;
  }
  return 1.0 - sum / static_cast<double>(latencies.size());
}

// Heterogeneity of a population, each device timed on one sample and a
// payload of `payload_bits` (one bit by default).
inline double heterogeneity_indicator(std::span<const DeviceSpec> specs, int alpha,
                                      double n0_dbm_per_hz, double payload_bits = 1.0) {
  std::vector<double> tau;
  tau.reserve(specs.size());
  for (const auto& s : specs) {
    tau.push_back(round_costs(s, alpha, 1.0, payload_bits, n0_dbm_per_hz).tau_total);
  }
  return heterogeneity_from_latencies(tau);
}

}  // namespace gfl
