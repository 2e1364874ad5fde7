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

#include "dtirex/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace dtirex {

namespace {

// Stream separation: the sampler, the dropout masks and the initial weights
// each get their own generator derived from the run seed.
constexpr std::uint64_t kSamplerStream = 0x5a3d1f0b9c4e7a21ULL;
constexpr std::uint64_t kDropoutStream = 0xc2b2ae3d27d4eb4fULL;

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& why) { throw TrainError(TrainErrc::InvalidConfig, why); };
  if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
  if (batch_size < 1) bad("batch_size must be positive");
  if (!(adam_epsilon > 0.0)) bad("adam_epsilon must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    bad("adam betas must lie in [0, 1)");
  }
  if (gradient_accumulation_steps < 1) bad("gradient_accumulation_steps must be positive");
  if (!(max_grad_norm > 0.0)) bad("max_grad_norm must be positive");
  if (!(weight_decay >= 0.0)) bad("weight_decay must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (max_seq_length < 8) bad("max_seq_length must be at least 8");
}

std::vector<double> class_weights(std::span<const int> labels) {
  if (labels.empty()) throw TrainError(TrainErrc::EmptyInput, "no labels to weight");
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  const auto n = static_cast<double>(labels.size());
  std::vector<double> weights;
  weights.reserve(labels.size());
  for (int l : labels) weights.push_back(n / static_cast<double>(counts[l]));
  return weights;
}

std::vector<std::size_t> weighted_sample(std::span<const double> weights, std::size_t n_draws,
                                         Rng& rng) {
  if (weights.empty()) throw TrainError(TrainErrc::EmptyInput, "no weights to sample from");
  std::vector<double> cumulative(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw TrainError(TrainErrc::InvalidConfig, "sample weights must be finite and positive");
    }
    total += weights[i];
    cumulative[i] = total;
  }
  std::vector<std::size_t> draws;
  draws.reserve(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    draws.push_back(static_cast<std::size_t>(it - cumulative.begin()));
  }
  return draws;
}

std::vector<std::size_t> weighted_sample(std::span<const double> weights, std::size_t n_draws,
                                         std::uint64_t seed) {
  Rng rng(seed);
  return weighted_sample(weights, n_draws, rng);
}

double clip_global_norm(Params& grads, double max_norm) {
  if (!grads.all_finite()) {
    throw TrainError(TrainErrc::NonFiniteGradient, "gradient contains NaN or infinity");
  }
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& t : grads.tensors()) t.value *= scale;
  }
  return norm;
}

OptState OptState::zeros_like(const Params& params) {
  return OptState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(Params& params, const Params& grads, OptState& opt, const TrainConfig& cfg) {
  auto& pt = params.tensors();
  const auto& gt = grads.tensors();
  if (gt.size() != pt.size() || opt.m.tensors().size() != pt.size()) {
    throw TrainError(TrainErrc::ShapeMismatch, "optimizer state does not match parameters");
  }
  opt.step += 1;
  const auto step = static_cast<double>(opt.step);
  double lr = cfg.learning_rate;
  if (cfg.warmup_steps > 0 && opt.step < static_cast<std::int64_t>(cfg.warmup_steps)) {
    lr *= step / static_cast<double>(cfg.warmup_steps);
  }
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, step);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, step);
  for (std::size_t i = 0; i < pt.size(); ++i) {
    auto& m = opt.m.tensors()[i].value;
    auto& v = opt.v.tensors()[i].value;
    const auto& g = gt[i].value;
    auto& theta = pt[i].value;
    if (g.size() != theta.size()) {
      throw TrainError(TrainErrc::ShapeMismatch, "gradient shape mismatch for " + pt[i].name);
    }
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    if (cfg.weight_decay > 0.0) theta *= 1.0 - lr * cfg.weight_decay;
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_epsilon);
  }
}

std::vector<std::string> default_label_table() {
  std::vector<std::string> labels;
  for (int id = 0; id < static_cast<int>(kNumClasses); ++id) {
    labels.emplace_back(label_name(class_label(id)));
  }
  return labels;
}

double accuracy(const Params& params, std::span<const EncodedExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    if (argmax(forward(params, ex, Mode::Eval).trace.logits) == ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

Checkpoint train(std::span<const EncodedExample> examples, const ModelConfig& model_cfg,
                 const TrainConfig& train_cfg, const Vocabulary& vocab, std::ostream* log,
                 std::vector<EpochLog>* history) {
  train_cfg.validate();
  if (examples.empty()) throw TrainError(TrainErrc::EmptyInput, "no training examples");
  ModelConfig cfg = model_cfg;
  cfg.dropout = train_cfg.dropout;
  if (cfg.vocab_size != vocab.size()) {
    throw TrainError(TrainErrc::InvalidConfig, "model vocab_size " + std::to_string(cfg.vocab_size) +
                                                   " differs from vocabulary size " +
                                                   std::to_string(vocab.size()));
  }
  for (const auto& ex : examples) {
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= cfg.n_classes) {
      throw TrainError(TrainErrc::InvalidConfig, "example label outside the class range");
    }
  }

  Checkpoint ckpt;
  ckpt.model = cfg;
  ckpt.params = init_params(cfg, train_cfg.seed);
  ckpt.vocab = vocab;
  ckpt.labels = default_label_table();
  ckpt.labels.resize(cfg.n_classes);
  ckpt.train = train_cfg;

  std::vector<int> labels;
  labels.reserve(examples.size());
  for (const auto& ex : examples) labels.push_back(ex.label);
  const std::vector<double> weights = class_weights(labels);

  OptState opt = OptState::zeros_like(ckpt.params);
  Rng sampler(train_cfg.seed ^ kSamplerStream);
  Rng dropout(train_cfg.seed ^ kDropoutStream);
  const std::size_t accum = train_cfg.gradient_accumulation_steps;

  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    const auto order = weighted_sample(weights, examples.size(), sampler);
    std::vector<EncodedExample> batch;
    Params accumulated = ckpt.params.zeros_like();
    std::size_t pending = 0;
    double loss_sum = 0.0;
    std::size_t hits = 0;

    auto apply = [&]() {
      for (auto& t : accumulated.tensors()) t.value /= static_cast<double>(pending);
      clip_global_norm(accumulated, train_cfg.max_grad_norm);
      adam_step(ckpt.params, accumulated, opt, train_cfg);
      accumulated.set_zero();
      pending = 0;
    };

    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + train_cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(examples[order[i]]);
      LossAndGrad lg = loss_and_grad(ckpt.params, batch, Mode::Train, &dropout);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      hits += lg.correct;
      accumulated.add_scaled(lg.grads, 1.0);
      if (++pending == accum) apply();
    }
    if (pending > 0) apply();

    EpochLog entry{epoch, loss_sum / static_cast<double>(order.size()),
                   static_cast<double>(hits) / static_cast<double>(order.size())};
    if (log != nullptr) {
      std::ostringstream line;
      line.precision(6);
      line << "epoch " << entry.epoch << "\tloss " << std::fixed << entry.mean_loss
           << "\ttrain_acc " << entry.train_accuracy << '\n';
      *log << line.str() << std::flush;
    }
    if (history != nullptr) history->push_back(entry);
    ckpt.epochs_completed = epoch;
  }
  return ckpt;
}

}  // namespace dtirex
