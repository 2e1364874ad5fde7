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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "dtirex/common.hpp"

namespace dtirex {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class ModelErrc {
  InvalidConfig,
  IdOutOfRange,
  SequenceTooLong,
  SpanOutOfRange,
  InsufficientLayers,
  UnknownTensor,
  ShapeMismatch,
  PreconditionViolation,
};
using ModelError = CodedError<ModelErrc>;

enum class HeadKind {
  Model1,    // [CLS]/<s> vector through two dense layers
  RbertCnn,  // last-4-layer CNN + entity averages (+ optional <s> path)
};

std::string_view head_name(HeadKind head);
HeadKind parse_head(std::string_view name);  // "model1" | "rbert-cnn"

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t ffn = 128;
  std::size_t max_positions = 512;
  std::vector<std::size_t> cnn_windows{3, 4, 5};
  std::size_t cnn_filters = 16;  // per window size
  std::size_t head_dim = 64;     // width of each fused dense output
  std::size_t n_classes = 11;
  double dropout = 0.5;
  bool include_cls_path = true;
  HeadKind head = HeadKind::RbertCnn;

  void validate() const;
  std::size_t pooled_features() const { return cnn_windows.size() * cnn_filters; }
  // Width of the concatenated head outputs feeding the final dense layer.
  std::size_t fused_width() const;

  bool operator==(const ModelConfig&) const = default;
};

struct Tensor {
  std::string name;
  // Logical shape; value is stored as shape[0] x prod(shape[1:]).
  std::vector<std::size_t> shape;
  Matrix value;

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

// Named parameter tensors of the encoder and the configured head, in a fixed
// creation order. Gradients use the same type.
class Params {
 public:
  Params() = default;
  // All tensors zero-initialized (normalization gains included).
  explicit Params(const ModelConfig& cfg);

  const ModelConfig& config() const { return config_; }

  Matrix& operator[](std::string_view name);
  const Matrix& operator[](std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t parameter_count() const;

  Params zeros_like() const;
  void set_zero();
  // this += scale * other
  void add_scaled(const Params& other, double scale);
  bool all_finite() const;
  double squared_norm() const;

  bool bitwise_equal(const Params& other) const;

 private:
  void add(std::string name, std::vector<std::size_t> shape);

  ModelConfig config_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Affine weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); embeddings use fan_in =
// hidden; biases zero; normalization gains one. Deterministic in the seed.
Params init_params(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace dtirex
