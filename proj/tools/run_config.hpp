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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dtirex/dtirex.hpp"

namespace dtirex::cli {

enum class ConfigErrc { UnknownKey, BadValue, Io };
using ConfigError = CodedError<ConfigErrc>;

struct SplitPaths {
  std::filesystem::path abstracts;
  std::filesystem::path entities;
  std::filesystem::path relations;
};

// Everything a subcommand can be told. Keys are "<section>.<field>", for
// example model.hidden, train.learning_rate, splitter.non_terminal_tokens,
// paths.train.abstracts. "seed" is shorthand for train.seed.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SplitterConfig splitter;
  std::size_t min_frequency = 1;

  SplitPaths train_corpus;
  SplitPaths dev_corpus;
  SplitPaths test_corpus;
  std::filesystem::path examples;
  std::filesystem::path vocab;
  std::filesystem::path checkpoint;
  std::filesystem::path predictions;
  std::filesystem::path gold;
  std::filesystem::path output;
  std::filesystem::path log;

  RunConfig();

  // Throws UnknownKey or BadValue.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // Flat key=value lines; '#' starts a comment; blank lines ignored.
  void merge_file(const std::filesystem::path& path);
  void merge_stream(std::istream& in, const std::string& source);

  // Every key with its current value, in registry order.
  void write(std::ostream& out) const;

  const SplitPaths& split(const std::string& name) const;
};

// All accepted keys, in registry order.
const std::vector<std::string>& config_keys();

}  // namespace dtirex::cli
