// Copyright 2026 The dtirex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtirex {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exception carrying a module-specific error code so callers can branch on
// the failure kind without parsing messages.
template <typename Code>
class CodedError : public Error {
 public:
  CodedError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

// Collects non-fatal warnings and named skip counters emitted by pipeline
// stages. Stages accept a nullable pointer; passing nullptr discards them.
struct Diagnostics {
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> counters;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
  void count(const std::string& key, std::size_t n = 1) { counters[key] += n; }
  std::size_t counter(const std::string& key) const {
    auto it = counters.find(key);
    return it == counters.end() ? 0 : it->second;
  }
};

inline void warn(Diagnostics* diag, std::string message) {
  if (diag != nullptr) diag->warn(std::move(message));
}

inline void count(Diagnostics* diag, const std::string& key, std::size_t n = 1) {
  if (diag != nullptr) diag->count(key, n);
}

// Seeded 64-bit Mersenne Twister. uniform() maps the top 53 bits to [0, 1)
// directly instead of going through std::uniform_real_distribution, whose
// output is not specified bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dtirex
