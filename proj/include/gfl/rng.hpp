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

#include <cstdint>
#include <random>

namespace gfl {

using Rng = std::mt19937_64;

// Named streams split off one master seed. Adding a stream must not renumber
// the existing ones, otherwise old manifests stop reproducing.
enum class Stream : std::uint64_t {
  graph = 1,
  data = 2,
  partition = 3,
  device_init = 4,
  device_round = 5,
  specs = 6,
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t s = detail::splitmix64(master);
  s = detail::splitmix64(s ^ static_cast<std::uint64_t>(stream));
  return detail::splitmix64(s ^ (index * 0xd1342543de82ef95ULL + 1));
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

}  // namespace gfl
