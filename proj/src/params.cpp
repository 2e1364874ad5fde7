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

#include "dtirex/params.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

namespace dtirex {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) { return s.ends_with(suffix); }

}  // namespace

std::string_view head_name(HeadKind head) {
  return head == HeadKind::Model1 ? "model1" : "rbert-cnn";
}

HeadKind parse_head(std::string_view name) {
  if (name == "model1") return HeadKind::Model1;
  if (name == "rbert-cnn") return HeadKind::RbertCnn;
  throw ModelError(ModelErrc::InvalidConfig, "unknown head '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& why) { throw ModelError(ModelErrc::InvalidConfig, why); };
  if (vocab_size < 1) bad("vocab_size must be positive");
  if (hidden < 1 || heads < 1 || ffn < 1 || head_dim < 1) bad("dimensions must be positive");
  if (hidden % heads != 0) bad("hidden must be divisible by heads");
  if (max_positions < 2) bad("max_positions must be at least 2");
  if (n_classes < 2) bad("n_classes must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (head == HeadKind::RbertCnn) {
    if (layers < 4) {
      throw ModelError(ModelErrc::InsufficientLayers,
                       "the CNN head reads the last 4 layers; layers must be >= 4");
    }
    if (cnn_windows.empty() || cnn_filters < 1) bad("CNN windows and filter count must be positive");
    for (std::size_t k : cnn_windows) {
      if (k < 1) bad("CNN window sizes must be positive");
    }
  } else if (layers < 1) {
    bad("layers must be positive");
  }
}

std::size_t ModelConfig::fused_width() const {
  if (head == HeadKind::Model1) return head_dim;
  return head_dim * (include_cls_path ? 4 : 3);
}

Params::Params(const ModelConfig& cfg) : config_(cfg) {
  cfg.validate();
  const std::size_t H = cfg.hidden;
  add("embed.token", {cfg.vocab_size, H});
  add("embed.position", {cfg.max_positions, H});
  add("embed.norm.gain", {1, H});
  add("embed.norm.bias", {1, H});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    for (const char* proj : {"query", "key", "value", "output"}) {
      add(p + "attn." + proj + ".weight", {H, H});
      add(p + "attn." + proj + ".bias", {1, H});
    }
    add(p + "attn.norm.gain", {1, H});
    add(p + "attn.norm.bias", {1, H});
    add(p + "ffn.in.weight", {H, cfg.ffn});
    add(p + "ffn.in.bias", {1, cfg.ffn});
    add(p + "ffn.out.weight", {cfg.ffn, H});
    add(p + "ffn.out.bias", {1, H});
    add(p + "ffn.norm.gain", {1, H});
    add(p + "ffn.norm.bias", {1, H});
  }
  if (cfg.head == HeadKind::Model1) {
    add("model1.dense.weight", {H, cfg.head_dim});
    add("model1.dense.bias", {1, cfg.head_dim});
    add("model1.out.weight", {cfg.head_dim, cfg.n_classes});
    add("model1.out.bias", {1, cfg.n_classes});
  } else {
    for (std::size_t k : cfg.cnn_windows) {
      const std::string p = "cnn.window" + std::to_string(k) + ".";
      add(p + "weight", {cfg.cnn_filters, k, H});
      add(p + "bias", {1, cfg.cnn_filters});
    }
    add("cnn.dense.weight", {cfg.pooled_features(), cfg.head_dim});
    add("cnn.dense.bias", {1, cfg.head_dim});
    add("chem.dense.weight", {H, cfg.head_dim});
    add("chem.dense.bias", {1, cfg.head_dim});
    add("prot.dense.weight", {H, cfg.head_dim});
    add("prot.dense.bias", {1, cfg.head_dim});
    if (cfg.include_cls_path) {
      add("cls.dense.weight", {H, cfg.head_dim});
      add("cls.dense.bias", {1, cfg.head_dim});
    }
    add("out.weight", {cfg.fused_width(), cfg.n_classes});
    add("out.bias", {1, cfg.n_classes});
  }
}

void Params::add(std::string name, std::vector<std::size_t> shape) {
  const std::size_t rows = shape.at(0);
  const std::size_t cols =
      std::accumulate(shape.begin() + 1, shape.end(), std::size_t{1}, std::multiplies<>());
  index_.emplace(name, tensors_.size());
  tensors_.push_back({std::move(name), std::move(shape),
                      Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))});
}

Matrix& Params::operator[](std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw ModelError(ModelErrc::UnknownTensor, "no tensor named '" + std::string(name) + "'");
  }
  return tensors_[it->second].value;
}

const Matrix& Params::operator[](std::string_view name) const {
  return const_cast<Params&>(*this)[name];
}

bool Params::contains(std::string_view name) const {
  return index_.find(std::string(name)) != index_.end();
}

std::size_t Params::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

Params Params::zeros_like() const {
  Params out = *this;
  out.set_zero();
  return out;
}

void Params::set_zero() {
  for (auto& t : tensors_) t.value.setZero();
}

void Params::add_scaled(const Params& other, double scale) {
  if (other.tensors_.size() != tensors_.size()) {
    throw ModelError(ModelErrc::ShapeMismatch, "parameter sets differ in tensor count");
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    tensors_[i].value.noalias() += scale * other.tensors_[i].value;
  }
}

bool Params::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

double Params::squared_norm() const {
  double s = 0.0;
  for (const auto& t : tensors_) s += t.value.squaredNorm();
  return s;
}

bool Params::bitwise_equal(const Params& other) const {
  if (!(config_ == other.config_) || tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.shape != b.shape || a.value.size() != b.value.size()) return false;
    if (std::memcmp(a.value.data(), b.value.data(), sizeof(double) * a.size()) != 0) return false;
  }
  return true;
}

Params init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Params params(cfg);
  Rng rng(seed);
  for (auto& t : params.tensors()) {
    if (ends_with(t.name, ".gain")) {
      t.value.setOnes();
      continue;
    }
    if (ends_with(t.name, ".bias")) continue;
    // Embedding tables and dense weights; conv banks are (filters, k*H) with
    // fan-in k*H.
    std::size_t fan_in = t.shape.size() == 3 ? t.shape[1] * t.shape[2] : t.shape[0];
    if (t.name.starts_with("embed.")) fan_in = cfg.hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    double* data = t.value.data();
    for (Eigen::Index i = 0; i < t.value.size(); ++i) data[i] = rng.uniform(-bound, bound);
  }
  return params;
}

}  // namespace dtirex
