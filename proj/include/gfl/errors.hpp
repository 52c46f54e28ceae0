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

#include <stdexcept>
#include <string>

namespace gfl {

// Caller supplied something that violates a documented precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced or met non-finite values, or failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The scheduling problem has no feasible point.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated data file.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration; the message carries the offending key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace gfl
