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
#include <vector>

#include "gfl/config.hpp"
#include "gfl/setup.hpp"
#include "gfl/sysmodel.hpp"

namespace gfl {
namespace {

TEST(CompDelay, Examples) {
  DeviceSpec s;
  s.rho = 7.0;
  s.f = 7.0;
  EXPECT_DOUBLE_EQ(comp_delay(s, 1, 1), 1.0);
  s.rho = 1e4;
  s.f = 1e9;
  EXPECT_NEAR(comp_delay(s, 3, 450), 0.0135, 1e-15);
  EXPECT_DOUBLE_EQ(comp_delay(s, 6, 450), 2 * comp_delay(s, 3, 450));
  // Total cycles executed.
  EXPECT_DOUBLE_EQ(comp_delay(s, 3, 450) * s.f, 3 * 450 * s.rho);
}

TEST(CompEnergy, Examples) {
  DeviceSpec s;  // varsigma 1e-28, rho 1e4, f 1e9
  // 1e-28 * 1 * 450 * 1e4 * (1e9)^2
  EXPECT_NEAR(comp_energy(s, 1, 450), 4.5e-4, 1e-15);
  DeviceSpec fast = s;
  fast.f = 2e9;
  EXPECT_NEAR(comp_energy(fast, 1, 450), 4 * comp_energy(s, 1, 450), 1e-12);
  EXPECT_EQ(comp_energy(s, 1, 0), 0.0);
}

TEST(TranRate, UnitSnrGivesBandwidth) {
  DeviceSpec s;
  s.b = 1e6;
  s.xi_db = 0.0;
  const double n0_w = dbm_per_hz_to_watts_per_hz(-174.0);
  s.p_tran = n0_w * s.b;  // SNR = 1
  EXPECT_NEAR(tran_rate(s, -174.0), 1e6, 1e-6);
}

TEST(TranRate, TypicalDevice) {
  DeviceSpec s;
  s.b = 1e6;
  s.p_tran = 0.5;
  s.xi_db = 0.0;
  // Closed form with n0 = 10^(-174/10) mW/Hz = 10^(-20.4) W/Hz.
  const double expected = 1e6 * std::log2(1.0 + 0.5 / (std::pow(10.0, -20.4) * 1e6));
  EXPECT_NEAR(tran_rate(s, -174.0), expected, 1e-6);
  EXPECT_NEAR(tran_rate(s, -174.0) / 1e6, 46.8357646, 1e-6);
}

TEST(TranRate, VanishingPowerAndErrors) {
  DeviceSpec s;
  s.p_tran = 1e-30;
  EXPECT_LT(tran_rate(s, -174.0), 1e-6);
  DeviceSpec bad;
  bad.b = 0.0;
  EXPECT_THROW(tran_rate(bad, -174.0), InputError);
  s.p_tran = 1e-300;
  s.xi_db = -400;
  EXPECT_THROW(tran_rate(s, -174.0), NumericalError);
}

TEST(TranDelayEnergy, Examples) {
  EXPECT_EQ(tran_delay(0.0, 1e6), 0.0);
  DeviceSpec s;
  EXPECT_EQ(tran_energy(s, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(tran_delay(1e6, 1e6), 1.0);
  EXPECT_DOUBLE_EQ(tran_energy(s, 1.0), 0.5);
  const double full = tran_delay(payload_size(1000000, 0.5) * 2, 1e7);
  EXPECT_DOUBLE_EQ(tran_delay(payload_size(1000000, 0.5), 1e7), full / 2);
}

TEST(Payload, Examples) {
  EXPECT_EQ(payload_size(100, 1.0), 3200.0);
  EXPECT_EQ(payload_size(100, 0.1), 640.0);
  EXPECT_EQ(payload_size(100, 0.2), 2 * payload_size(100, 0.1));
  EXPECT_EQ(kept_entries(100, 0.101), 11);
  for (int k = 1; k < 99; ++k) {
    EXPECT_LT(payload_size(100, k / 100.0), payload_size(100, (k + 1) / 100.0));
  }
  EXPECT_THROW(payload_size(100, 0.0), InputError);
}

TEST(RoundCosts, SumsAndMonotone) {
  DeviceSpec s;
  const RoundCosts c = round_costs(s, 2, 100, 6400, -174.0);
  EXPECT_DOUBLE_EQ(c.tau_total, c.tau_comp + c.tau_tran);
  EXPECT_DOUBLE_EQ(c.energy(), c.e_comp + c.e_tran);
  const RoundCosts more = round_costs(s, 3, 120, 12800, -174.0);
  EXPECT_GT(more.tau_total, c.tau_total);
  EXPECT_GT(more.energy(), c.energy());
}

TEST(Heterogeneity, Examples) {
  const std::vector<double> same{0.3, 0.3, 0.3};
  EXPECT_EQ(heterogeneity_from_latencies(same), 0.0);
  const std::vector<double> two{1.0, 2.0};
  EXPECT_EQ(heterogeneity_from_latencies(two), 0.25);
  std::vector<double> slow(10, 1.0);
  slow[3] = 1e12;
  EXPECT_NEAR(heterogeneity_from_latencies(slow), 0.1 - 0.1 * 1e-12, 1e-12);
  const std::vector<double> one_fast{1.0, 1e12, 1e12, 1e12};
  EXPECT_NEAR(heterogeneity_from_latencies(one_fast), 1.0 - 1.0 / 4, 1e-9);
}

TEST(Heterogeneity, IdenticalSpecsAndTwoDeviceCase) {
  std::vector<DeviceSpec> specs(5);
  EXPECT_EQ(heterogeneity_indicator(specs, 3, -174.0), 0.0);
  // Two devices whose lower-bound latencies are 1 s and 2 s.
  std::vector<DeviceSpec> two(2);
  // Compute delays of 1e9 s and 2e9 s dwarf the ~1e-8 s it takes to send
  // one bit.
  two[0].rho = two[1].rho = 1e9;
  two[0].f = 1.0;
  two[1].f = 0.5;
  EXPECT_NEAR(heterogeneity_indicator(two, 1, -174.0), 0.25, 1e-12);
}

TEST(SampleSpecs, DeterministicAndDegenerate) {
  SystemConfig sys;
  EXPECT_EQ(sample_device_specs(3, 20, sys), sample_device_specs(3, 20, sys));
  EXPECT_NE(sample_device_specs(3, 20, sys), sample_device_specs(4, 20, sys));
  for (const auto& s : sample_device_specs(3, 20, sys)) {
    EXPECT_GE(s.f, 1e9);
    EXPECT_LE(s.f, 3.5e9);
    EXPECT_GE(s.rho, 1e4);
    EXPECT_LE(s.rho, 5e4);
    EXPECT_EQ(s.b, 1e6);
  }
  sys.rho = {2e4, 2e4};
  sys.f = {2e9, 2e9};
  sys.p_tran = {0.7, 0.7};
  sys.xi_db = {1.5, 1.5};
  const auto specs = sample_device_specs(9, 20, sys);
  EXPECT_EQ(heterogeneity_indicator(specs, 3, -174.0), 0.0);
}

TEST(SampleSpecs, WiderFrequencyRangeRaisesHeterogeneity) {
  SystemConfig narrow, wide;
  narrow.f = {2e9, 2.5e9};
  wide.f = {1e9, 3.5e9};
  double h_narrow = 0.0, h_wide = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    h_narrow += heterogeneity_indicator(sample_device_specs(seed, 20, narrow), 3, -174.0);
    h_wide += heterogeneity_indicator(sample_device_specs(seed, 20, wide), 3, -174.0);
  }
  EXPECT_GT(h_wide, h_narrow);
}

}  // namespace
}  // namespace gfl
