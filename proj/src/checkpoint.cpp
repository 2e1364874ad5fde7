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

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dtirex/train.hpp"

namespace dtirex {

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

[[noreturn]] void corrupt(const std::string& why) {
  throw CheckpointError(CheckpointErrc::Corrupt, "corrupt checkpoint: " + why);
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) corrupt("bad number '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    corrupt("bad integer '" + s + "'");
  }
  return v;
}

std::string join_sizes(const std::vector<std::size_t>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> split_sizes(const std::string& s, char sep) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = std::min(s.find(sep, pos), s.size());
    out.push_back(static_cast<std::size_t>(to_uint(s.substr(pos, next - pos))));
    pos = next + 1;
  }
  return out;
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(p[b]);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  const ModelConfig& m = ckpt.model;
  const TrainConfig& t = ckpt.train;
  std::ostringstream man;
  man << kCheckpointMagic << '\n';
  man << "config.vocab_size=" << m.vocab_size << '\n'
      << "config.hidden=" << m.hidden << '\n'
      << "config.layers=" << m.layers << '\n'
      << "config.heads=" << m.heads << '\n'
      << "config.ffn=" << m.ffn << '\n'
      << "config.max_positions=" << m.max_positions << '\n'
      << "config.cnn_windows=" << join_sizes(m.cnn_windows, ',') << '\n'
      << "config.cnn_filters=" << m.cnn_filters << '\n'
      << "config.head_dim=" << m.head_dim << '\n'
      << "config.n_classes=" << m.n_classes << '\n'
      << "config.dropout=" << format_double(m.dropout) << '\n'
      << "config.include_cls_path=" << (m.include_cls_path ? 1 : 0) << '\n'
      << "config.head=" << head_name(m.head) << '\n';
  man << "train.learning_rate=" << format_double(t.learning_rate) << '\n'
      << "train.epochs=" << t.epochs << '\n'
      << "train.batch_size=" << t.batch_size << '\n'
      << "train.adam_epsilon=" << format_double(t.adam_epsilon) << '\n'
      << "train.adam_beta1=" << format_double(t.adam_beta1) << '\n'
      << "train.adam_beta2=" << format_double(t.adam_beta2) << '\n'
      << "train.gradient_accumulation_steps=" << t.gradient_accumulation_steps << '\n'
      << "train.max_grad_norm=" << format_double(t.max_grad_norm) << '\n'
      << "train.weight_decay=" << format_double(t.weight_decay) << '\n'
      << "train.warmup_steps=" << t.warmup_steps << '\n'
      << "train.dropout=" << format_double(t.dropout) << '\n'
      << "train.max_seq_length=" << t.max_seq_length << '\n'
      << "train.seed=" << t.seed << '\n';
  man << "meta.epochs_completed=" << ckpt.epochs_completed << '\n';
  man << "labels.count=" << ckpt.labels.size() << '\n';
  for (std::size_t i = 0; i < ckpt.labels.size(); ++i) man << "label." << i << '=' << ckpt.labels[i] << '\n';
  man << "vocab.count=" << ckpt.vocab.size() << '\n';
  for (std::size_t i = 0; i < ckpt.vocab.size(); ++i) {
    man << "vocab." << i << '=' << ckpt.vocab.tokens()[i] << '\n';
  }

  std::string payload;
  payload.reserve(ckpt.params.parameter_count() * 8);
  for (const auto& tensor : ckpt.params.tensors()) {
    man << "tensor=" << tensor.name << " f64 " << join_sizes(tensor.shape, 'x') << ' '
        << payload.size() << ' ' << tensor.size() * 8 << '\n';
    const double* data = tensor.value.data();
    for (std::size_t i = 0; i < tensor.size(); ++i) put_le(payload, data[i]);
  }
  man << "payload_bytes=" << payload.size() << '\n' << "end\n";
  out << man.str();
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw CheckpointError(CheckpointErrc::Io, "failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw CheckpointError(CheckpointErrc::FormatVersionMismatch,
                          "not a " + std::string(kCheckpointMagic) + " checkpoint");
  }
  std::map<std::string, std::string> kv;
  struct TensorEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset, bytes;
  };
  std::vector<TensorEntry> entries;
  // Collect the whole manifest first so a truncated file reports the missing
  // end marker rather than whatever half line it stops on.
  std::vector<std::string> manifest;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    manifest.push_back(std::move(line));
  }
  if (!ended) {
    throw CheckpointError(CheckpointErrc::FormatVersionMismatch,
                          "checkpoint manifest is truncated (no end marker)");
  }
  for (const std::string& entry : manifest) {
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) corrupt("manifest line without '=': " + entry);
    const std::string key = entry.substr(0, eq);
    const std::string value = entry.substr(eq + 1);
    if (key == "tensor") {
      std::istringstream fields(value);
      TensorEntry e;
      std::string dtype, shape, offset, bytes;
      if (!(fields >> e.name >> dtype >> shape >> offset >> bytes)) corrupt("bad tensor line");
      if (dtype != "f64") corrupt("unsupported dtype " + dtype);
      e.shape = split_sizes(shape, 'x');
      e.offset = to_uint(offset);
      e.bytes = to_uint(bytes);
      entries.push_back(std::move(e));
    } else if (!kv.emplace(key, value).second) {
      corrupt("duplicate manifest key " + key);
    }
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) corrupt("missing manifest key " + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  Checkpoint ckpt;
  ModelConfig& m = ckpt.model;
  m.vocab_size = to_uint(take("config.vocab_size"));
  m.hidden = to_uint(take("config.hidden"));
  m.layers = to_uint(take("config.layers"));
  m.heads = to_uint(take("config.heads"));
  m.ffn = to_uint(take("config.ffn"));
  m.max_positions = to_uint(take("config.max_positions"));
  m.cnn_windows = split_sizes(take("config.cnn_windows"), ',');
  m.cnn_filters = to_uint(take("config.cnn_filters"));
  m.head_dim = to_uint(take("config.head_dim"));
  m.n_classes = to_uint(take("config.n_classes"));
  m.dropout = to_double(take("config.dropout"));
  m.include_cls_path = to_uint(take("config.include_cls_path")) != 0;
  m.head = parse_head(take("config.head"));

  TrainConfig& t = ckpt.train;
  t.learning_rate = to_double(take("train.learning_rate"));
  t.epochs = to_uint(take("train.epochs"));
  t.batch_size = to_uint(take("train.batch_size"));
  t.adam_epsilon = to_double(take("train.adam_epsilon"));
  t.adam_beta1 = to_double(take("train.adam_beta1"));
  t.adam_beta2 = to_double(take("train.adam_beta2"));
  t.gradient_accumulation_steps = to_uint(take("train.gradient_accumulation_steps"));
  t.max_grad_norm = to_double(take("train.max_grad_norm"));
  t.weight_decay = to_double(take("train.weight_decay"));
  t.warmup_steps = to_uint(take("train.warmup_steps"));
  t.dropout = to_double(take("train.dropout"));
  t.max_seq_length = to_uint(take("train.max_seq_length"));
  t.seed = to_uint(take("train.seed"));
  ckpt.epochs_completed = to_uint(take("meta.epochs_completed"));

  const auto n_labels = to_uint(take("labels.count"));
  for (std::uint64_t i = 0; i < n_labels; ++i) ckpt.labels.push_back(take("label." + std::to_string(i)));
  const auto n_vocab = to_uint(take("vocab.count"));
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < n_vocab; ++i) tokens.push_back(take("vocab." + std::to_string(i)));
  const auto payload_bytes = to_uint(take("payload_bytes"));
  if (!kv.empty()) corrupt("unknown manifest key " + kv.begin()->first);
  ckpt.vocab = Vocabulary(std::move(tokens));

  try {
    ckpt.params = Params(m);
  } catch (const ModelError& e) {
    corrupt(std::string("invalid model config: ") + e.what());
  }
  auto& tensors = ckpt.params.tensors();
  if (entries.size() != tensors.size()) {
    throw CheckpointError(CheckpointErrc::ShapeMismatch,
                          "manifest lists " + std::to_string(entries.size()) + " tensors, config implies " +
                              std::to_string(tensors.size()));
  }
  std::uint64_t expected_offset = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.name != tensors[i].name || e.shape != tensors[i].shape ||
        e.bytes != tensors[i].size() * 8 || e.offset != expected_offset) {
      throw CheckpointError(CheckpointErrc::ShapeMismatch,
                            "tensor " + e.name + " disagrees with the configured shape or payload");
    }
    expected_offset += e.bytes;
  }
  if (expected_offset != payload_bytes) {
    throw CheckpointError(CheckpointErrc::ShapeMismatch, "payload size disagrees with tensor table");
  }

  std::string payload(payload_bytes, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::uint64_t>(in.gcount()) != payload_bytes) {
    throw CheckpointError(CheckpointErrc::Io, "checkpoint payload is truncated");
  }
  if (in.peek() != std::char_traits<char>::eof()) corrupt("trailing bytes after payload");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double* data = tensors[i].value.data();
    const char* src = payload.data() + entries[i].offset;
    for (std::size_t k = 0; k < tensors[i].size(); ++k) data[k] = get_le(src + 8 * k);
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  // Write to a sibling file and rename so readers never see a partial file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointErrc::Io, "cannot write " + tmp.string());
    write_checkpoint(ckpt, out);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointErrc::Io, "cannot move checkpoint to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::Io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace dtirex
