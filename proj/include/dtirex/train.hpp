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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dtirex/model.hpp"
#include "dtirex/tokenizer.hpp"

namespace dtirex {

enum class TrainErrc { EmptyInput, InvalidConfig, NonFiniteGradient, ShapeMismatch };
using TrainError = CodedError<TrainErrc>;

// Defaults are the fine-tuning hyperparameters reported for the R-BERT-CNN model.
struct TrainConfig {
  double learning_rate = 3e-5;
  std::size_t epochs = 7;
  std::size_t batch_size = 32;
  double adam_epsilon = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  std::size_t gradient_accumulation_steps = 1;
  double max_grad_norm = 1.0;
  double weight_decay = 0.0;
  std::size_t warmup_steps = 0;
  double dropout = 0.5;
  std::size_t max_seq_length = 512;
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Per-example inverse class frequency, N / n_class.
std::vector<double> class_weights(std::span<const int> labels);

// Draws with replacement, P(i) proportional to weights[i].
std::vector<std::size_t> weighted_sample(std::span<const double> weights, std::size_t n_draws,
                                         std::uint64_t seed);
std::vector<std::size_t> weighted_sample(std::span<const double> weights, std::size_t n_draws,
                                         Rng& rng);

// Scales every gradient by max_norm / g when the global L2 norm g exceeds
// max_norm. Returns the norm before clipping.
double clip_global_norm(Params& grads, double max_norm);

struct OptState {
  Params m;
  Params v;
  std::int64_t step = 0;

  static OptState zeros_like(const Params& params);
};

// Bias-corrected Adam. A nonzero weight_decay is applied decoupled
// (theta -= lr * wd * theta); warmup scales lr linearly over warmup_steps.
void adam_step(Params& params, const Params& grads, OptState& opt, const TrainConfig& cfg);

struct Checkpoint {
  ModelConfig model;
  Params params;
  Vocabulary vocab;
  std::vector<std::string> labels;  // class id -> label name
  TrainConfig train;
  std::size_t epochs_completed = 0;
};

std::vector<std::string> default_label_table();

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // argmax hits over the epoch's draws, train mode
};

// One epoch draws len(examples) indices with inverse-frequency weights and
// walks them in batch_size chunks. Writes "epoch <k>\tloss <mean>\ttrain_acc <a>"
// lines to `log` when given.
Checkpoint train(std::span<const EncodedExample> examples, const ModelConfig& model_cfg,
                 const TrainConfig& train_cfg, const Vocabulary& vocab,
                 std::ostream* log = nullptr, std::vector<EpochLog>* history = nullptr);

// Eval-mode accuracy of argmax predictions.
double accuracy(const Params& params, std::span<const EncodedExample> examples);

enum class CheckpointErrc { Io, FormatVersionMismatch, ShapeMismatch, Corrupt };
using CheckpointError = CodedError<CheckpointErrc>;

inline constexpr const char* kCheckpointMagic = "REXT1";

// Text manifest (config, label table, vocabulary, tensor table) followed by
// little-endian float64 payloads.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace dtirex
