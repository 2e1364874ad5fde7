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
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dtirex/params.hpp"
#include "dtirex/tokenizer.hpp"

namespace dtirex {

enum class Mode { Train, Eval };

namespace detail {
struct EncoderCache;
struct HeadCache;
}  // namespace detail

// Encoder activations: layers[0] is the embedding output, layers[l] the
// output of block l (1-based), so layers.size() == config.layers + 1.
struct HiddenStates {
  std::vector<Matrix> layers;
  std::vector<std::int32_t> ids;
  std::shared_ptr<const detail::EncoderCache> cache;  // null for synthetic states

  std::size_t length() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].rows()); }
};

struct ForwardTrace {
  RowVector logits;
  RowVector probabilities;
  // CNN head only: post-ReLU activations per window size, (4T-k+1) x filters,
  // and the max-pooled features in window-major order.
  std::vector<Matrix> conv_activations;
  RowVector pooled;
  // Winning position per pooled feature; -1 where the ReLU clamps it to zero.
  std::vector<long> pool_winners;
  // Concatenated head outputs before dropout (Model I: the dense layer output).
  RowVector fused;
  std::shared_ptr<const detail::HeadCache> cache;
};

// Layer normalization epsilon.
inline constexpr double kLayerNormEps = 1e-12;

// Post-LN transformer encoder; pad ids are masked out of attention keys.
HiddenStates encode_forward(const Params& params, std::span<const std::int32_t> ids);

// Rows of h^(L-3), h^(L-2), h^(L-1), h^(L) stacked along the sequence axis.
Matrix stack_last_four(const HiddenStates& states);

RowVector softmax(const RowVector& logits);

// Model I: logits = W2 * tanh(W1 * v + b1) + b2 with v the final-layer <s> row.
// In train mode dropout is applied to v and to the tanh output, with masks
// drawn from `dropout_rng`.
ForwardTrace head_model1(const Params& params, const HiddenStates& states, Mode mode,
                         Rng* dropout_rng = nullptr);

// R-BERT-CNN head over the last four layers plus entity averages.
ForwardTrace head_rbert_cnn(const Params& params, const HiddenStates& states, TokenSpan chem,
                            TokenSpan prot, Mode mode, Rng* dropout_rng = nullptr);

// Cross-entropy, -logit[label] + logsumexp(logits).
double loss(const ForwardTrace& trace, int label);

struct ExampleForward {
  HiddenStates states;
  ForwardTrace trace;
};

// Encoder plus the head selected by the params' config.
ExampleForward forward(const Params& params, const EncodedExample& example, Mode mode,
                       Rng* dropout_rng = nullptr);

// Accumulates scale * d loss(label) / d params into grads, reusing the
// dropout masks recorded in the trace.
void backward(const Params& params, const ExampleForward& fwd, int label, double scale,
              Params& grads);

struct LossAndGrad {
  double loss = 0.0;
  Params grads;
  std::size_t correct = 0;  // argmax hits in this batch
};

// Mean loss over the batch and its exact gradient for the sampled masks.
LossAndGrad loss_and_grad(const Params& params, std::span<const EncodedExample> batch, Mode mode,
                          Rng* dropout_rng = nullptr);

// Lowest class id among the maxima.
int argmax(const RowVector& v);

using GradientFn = std::function<Params(const Params&, const EncodedExample&)>;

struct GradCheckOptions {
  std::size_t min_coordinates = 200;
  std::uint64_t seed = 0;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Analytic gradient under test; defaults to loss_and_grad in eval mode.
  GradientFn analytic;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  // Coordinates replaced because the +/- eps stencil changed which pooling
  // positions win (the loss is not differentiable across that step).
  std::size_t kinks_skipped = 0;
  std::map<std::string, double> per_tensor;  // max relative error by tensor
};

// Central differences (f(x+eps) - f(x-eps)) / (2 eps) on sampled
// coordinates from every tensor, compared against the analytic gradient.
// A coordinate whose stencil crosses a max-pool or ReLU switch is replaced by
// another coordinate of the same tensor.
GradCheckReport grad_check(const Params& params, const EncodedExample& example, double eps,
                           const GradCheckOptions& options = {});

}  // namespace dtirex
