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

#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

namespace dtirex::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError(ConfigErrc::BadValue, "bad value '" + value + "' for " + key + ": " + why);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, value, "not a number");
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  bad(key, value, "expected on/off");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= value.size() && !value.empty()) {
    const std::size_t comma = value.find(',', pos);
    out.push_back(trim(value.substr(pos, comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Entry size_entry(std::string key, T RunConfig::*section, std::size_t T::*field) {
  return {std::move(key),
          [section, field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*section.*field = parse_number<std::size_t>(k, v);
          },
          [section, field](const RunConfig& c) { return std::to_string(c.*section.*field); }};
}

template <typename T>
Entry double_entry(std::string key, T RunConfig::*section, double T::*field) {
  return {std::move(key),
          [section, field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*section.*field = parse_number<double>(k, v);
          },
          [section, field](const RunConfig& c) { return format_double(c.*section.*field); }};
}

Entry path_entry(std::string key, std::filesystem::path RunConfig::*field) {
  return {std::move(key),
          [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; },
          [field](const RunConfig& c) { return (c.*field).string(); }};
}

Entry split_entry(std::string key, SplitPaths RunConfig::*split, std::filesystem::path SplitPaths::*field) {
  return {std::move(key),
          [split, field](RunConfig& c, const std::string&, const std::string& v) { c.*split.*field = v; },
          [split, field](const RunConfig& c) { return (c.*split.*field).string(); }};
}

std::vector<Entry> build_registry() {
  using M = ModelConfig;
  using T = TrainConfig;
  std::vector<Entry> r;
  r.push_back({"seed",
               [](RunConfig& c, const std::string& k, const std::string& v) {
                 c.train.seed = parse_number<std::uint64_t>(k, v);
               },
               [](const RunConfig& c) { return std::to_string(c.train.seed); }});

  r.push_back(size_entry("model.vocab_size", &RunConfig::model, &M::vocab_size));
  r.push_back(size_entry("model.hidden", &RunConfig::model, &M::hidden));
  r.push_back(size_entry("model.layers", &RunConfig::model, &M::layers));
  r.push_back(size_entry("model.heads", &RunConfig::model, &M::heads));
  r.push_back(size_entry("model.ffn", &RunConfig::model, &M::ffn));
  r.push_back(size_entry("model.max_positions", &RunConfig::model, &M::max_positions));
  r.push_back({"model.cnn_windows",
               [](RunConfig& c, const std::string& k, const std::string& v) {
                 std::vector<std::size_t> w;
                 for (const auto& item : split_list(v)) w.push_back(parse_number<std::size_t>(k, item));
                 if (w.empty()) bad(k, v, "need at least one window");
                 c.model.cnn_windows = std::move(w);
               },
               [](const RunConfig& c) {
                 std::vector<std::string> items;
                 for (auto w : c.model.cnn_windows) items.push_back(std::to_string(w));
                 return join(items);
               }});
  r.push_back(size_entry("model.cnn_filters", &RunConfig::model, &M::cnn_filters));
  r.push_back(size_entry("model.head_dim", &RunConfig::model, &M::head_dim));
  r.push_back(size_entry("model.n_classes", &RunConfig::model, &M::n_classes));
  r.push_back(double_entry("model.dropout", &RunConfig::model, &M::dropout));
  r.push_back({"model.include_cls_path",
               [](RunConfig& c, const std::string& k, const std::string& v) {
                 c.model.include_cls_path = parse_bool(k, v);
               },
               [](const RunConfig& c) { return std::string(c.model.include_cls_path ? "on" : "off"); }});
  r.push_back({"model.head",
               [](RunConfig& c, const std::string& k, const std::string& v) {
                 try {
                   c.model.head = parse_head(v);
                 } catch (const Error&) {
                   bad(k, v, "expected model1 or rbert-cnn");
                 }
               },
               [](const RunConfig& c) { return std::string(head_name(c.model.head)); }});

  r.push_back(double_entry("train.learning_rate", &RunConfig::train, &T::learning_rate));
  r.push_back(size_entry("train.epochs", &RunConfig::train, &T::epochs));
  r.push_back(size_entry("train.batch_size", &RunConfig::train, &T::batch_size));
  r.push_back(double_entry("train.adam_epsilon", &RunConfig::train, &T::adam_epsilon));
  r.push_back(double_entry("train.adam_beta1", &RunConfig::train, &T::adam_beta1));
  r.push_back(double_entry("train.adam_beta2", &RunConfig::train, &T::adam_beta2));
  r.push_back(size_entry("train.gradient_accumulation_steps", &RunConfig::train,
                         &T::gradient_accumulation_steps));
  r.push_back(double_entry("train.max_grad_norm", &RunConfig::train, &T::max_grad_norm));
  r.push_back(double_entry("train.weight_decay", &RunConfig::train, &T::weight_decay));
  r.push_back(size_entry("train.warmup_steps", &RunConfig::train, &T::warmup_steps));
  r.push_back(double_entry("train.dropout", &RunConfig::train, &T::dropout));
  r.push_back(size_entry("train.max_seq_length", &RunConfig::train, &T::max_seq_length));
  r.push_back({"train.seed",
               [](RunConfig& c, const std::string& k, const std::string& v) {
                 c.train.seed = parse_number<std::uint64_t>(k, v);
               },
               [](const RunConfig& c) { return std::to_string(c.train.seed); }});

  r.push_back({"splitter.non_terminal_tokens",
               [](RunConfig& c, const std::string&, const std::string& v) {
                 c.splitter.non_terminal_tokens = split_list(v);
               },
               [](const RunConfig& c) { return join(c.splitter.non_terminal_tokens); }});
  r.push_back({"splitter.abbreviations",
               [](RunConfig& c, const std::string&, const std::string& v) {
                 c.splitter.abbreviations = split_list(v);
               },
               [](const RunConfig& c) { return join(c.splitter.abbreviations); }});
  r.push_back({"vocab.min_frequency",
               [](RunConfig& c, const std::string& k, const std::string& v) {
                 c.min_frequency = parse_number<std::size_t>(k, v);
               },
               [](const RunConfig& c) { return std::to_string(c.min_frequency); }});

  for (auto [name, split] : {std::pair{"train", &RunConfig::train_corpus},
                             std::pair{"dev", &RunConfig::dev_corpus},
                             std::pair{"test", &RunConfig::test_corpus}}) {
    const std::string prefix = std::string("paths.") + name + ".";
    r.push_back(split_entry(prefix + "abstracts", split, &SplitPaths::abstracts));
    r.push_back(split_entry(prefix + "entities", split, &SplitPaths::entities));
    r.push_back(split_entry(prefix + "relations", split, &SplitPaths::relations));
  }
  r.push_back(path_entry("paths.examples", &RunConfig::examples));
  r.push_back(path_entry("paths.vocab", &RunConfig::vocab));
  r.push_back(path_entry("paths.checkpoint", &RunConfig::checkpoint));
  r.push_back(path_entry("paths.predictions", &RunConfig::predictions));
  r.push_back(path_entry("paths.gold", &RunConfig::gold));
  r.push_back(path_entry("paths.output", &RunConfig::output));
  r.push_back(path_entry("paths.log", &RunConfig::log));
  return r;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> r = build_registry();
  return r;
}

const Entry& lookup(const std::string& key) {
  for (const auto& e : registry()) {
    if (e.key == key) return e;
  }
  throw ConfigError(ConfigErrc::UnknownKey, "unknown configuration key '" + key + "'");
}

}  // namespace

RunConfig::RunConfig() = default;

void RunConfig::set(const std::string& key, const std::string& value) {
  lookup(key).set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const { return lookup(key).get(*this); }

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ConfigErrc::Io, "cannot open config file " + path.string());
  merge_stream(in, path.string());
}

void RunConfig::merge_stream(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(ConfigErrc::BadValue,
                        source + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(e.code(), source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::write(std::ostream& out) const {
  for (const auto& e : registry()) out << e.key << '=' << e.get(*this) << '\n';
}

const SplitPaths& RunConfig::split(const std::string& name) const {
  if (name == "train") return train_corpus;
  if (name == "dev") return dev_corpus;
  if (name == "test") return test_corpus;
  throw ConfigError(ConfigErrc::BadValue, "unknown split '" + name + "' (train, dev, test)");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& e : registry()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

}  // namespace dtirex::cli
