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

#include "dtirex/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace dtirex {

namespace detail {

struct NormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

struct LayerCache {
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per attention head, T x T
  Matrix context;
  NormCache norm1;
  Matrix norm1_out;
  Matrix ffn_pre;
  Matrix ffn_act;
  NormCache norm2;
};

struct EncoderCache {
  NormCache embed_norm;
  std::vector<LayerCache> layers;
};

struct HeadCache {
  HeadKind head = HeadKind::RbertCnn;
  // CNN head
  Matrix stacked;                             // 4T x H
  std::vector<std::vector<Eigen::Index>> argmax;  // per window, per filter
  RowVector pooled;
  RowVector cnn_out;  // tanh output
  TokenSpan chem, prot;
  RowVector chem_act, prot_act, cls_act;  // tanh of the averaged / <s> vectors
  // both heads
  RowVector fused;       // before dropout
  RowVector fused_mask;  // inverted-dropout multipliers
  // Model I
  RowVector cls_vec, cls_mask, dense_out, dense_mask;
};

}  // namespace detail

namespace {

using detail::EncoderCache;
using detail::HeadCache;
using detail::LayerCache;
using detail::NormCache;

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, NormCache& cache) {
  const Eigen::Index T = x.rows();
  cache.xhat.resize(T, x.cols());
  cache.inv_std.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double mean = x.row(t).mean();
    const RowVector centered = x.row(t).array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(x.cols());
    cache.inv_std(t) = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.xhat.row(t) = centered * cache.inv_std(t);
  }
  Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain, const NormCache& cache,
                           Matrix& dgain, Matrix& dbias) {
  dbias.row(0) += dy.colwise().sum();
  dgain.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index t = 0; t < dy.rows(); ++t) {
    const double mean_d = dxhat.row(t).mean();
    const double mean_dx = dxhat.row(t).dot(cache.xhat.row(t)) / static_cast<double>(dy.cols());
    dx.row(t) = cache.inv_std(t) *
                (dxhat.row(t).array() - mean_d - cache.xhat.row(t).array() * mean_dx).matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

struct LayerNames {
  std::string q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b, n1_g, n1_b, f1_w, f1_b, f2_w, f2_b, n2_g,
      n2_b;

  explicit LayerNames(std::size_t l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    q_w = p + "attn.query.weight";
    q_b = p + "attn.query.bias";
    k_w = p + "attn.key.weight";
    k_b = p + "attn.key.bias";
    v_w = p + "attn.value.weight";
    v_b = p + "attn.value.bias";
    o_w = p + "attn.output.weight";
    o_b = p + "attn.output.bias";
    n1_g = p + "attn.norm.gain";
    n1_b = p + "attn.norm.bias";
    f1_w = p + "ffn.in.weight";
    f1_b = p + "ffn.in.bias";
    f2_w = p + "ffn.out.weight";
    f2_b = p + "ffn.out.bias";
    n2_g = p + "ffn.norm.gain";
    n2_b = p + "ffn.norm.bias";
  }
};

Matrix layer_forward(const Params& p, std::size_t l, const Matrix& x,
                     const std::vector<bool>& is_pad, LayerCache& c) {
  const ModelConfig& cfg = p.config();
  const LayerNames n(l);
  const auto T = x.rows();
  const auto dh = static_cast<Eigen::Index>(cfg.hidden / cfg.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  c.q = affine(x, p[n.q_w], p[n.q_b]);
  c.k = affine(x, p[n.k_w], p[n.k_b]);
  c.v = affine(x, p[n.v_w], p[n.v_b]);
  c.context = Matrix::Zero(T, x.cols());
  c.probs.assign(cfg.heads, Matrix());
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    Matrix scores = c.q.middleCols(off, dh) * c.k.middleCols(off, dh).transpose() * scale;
    Matrix& probs = c.probs[h];
    probs = Matrix::Zero(T, T);
    for (Eigen::Index i = 0; i < T; ++i) {
      double max = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < T; ++j) {
        if (!is_pad[j]) max = std::max(max, scores(i, j));
      }
      if (!std::isfinite(max)) continue;  // every key is padding
      double sum = 0.0;
      for (Eigen::Index j = 0; j < T; ++j) {
        if (is_pad[j]) continue;
        probs(i, j) = std::exp(scores(i, j) - max);
        sum += probs(i, j);
      }
      probs.row(i) /= sum;
    }
    c.context.middleCols(off, dh) = probs * c.v.middleCols(off, dh);
  }
  Matrix residual = x + affine(c.context, p[n.o_w], p[n.o_b]);
  c.norm1_out = layer_norm(residual, p[n.n1_g], p[n.n1_b], c.norm1);

  c.ffn_pre = affine(c.norm1_out, p[n.f1_w], p[n.f1_b]);
  c.ffn_act = c.ffn_pre.unaryExpr([](double v) { return gelu(v); });
  residual = c.norm1_out + affine(c.ffn_act, p[n.f2_w], p[n.f2_b]);
  return layer_norm(residual, p[n.n2_g], p[n.n2_b], c.norm2);
}

// Returns d loss / d x for the block input and accumulates parameter grads.
Matrix layer_backward(const Params& p, std::size_t l, const Matrix& x, const LayerCache& c,
                      const Matrix& dy, Params& g) {
  const ModelConfig& cfg = p.config();
  const LayerNames n(l);
  const auto dh = static_cast<Eigen::Index>(cfg.hidden / cfg.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix dr2 = layer_norm_backward(dy, p[n.n2_g], c.norm2, g[n.n2_g], g[n.n2_b]);
  g[n.f2_w].noalias() += c.ffn_act.transpose() * dr2;
  g[n.f2_b].row(0) += dr2.colwise().sum();
  const Matrix dact = dr2 * p[n.f2_w].transpose();
  const Matrix dpre = dact.cwiseProduct(c.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }));
  g[n.f1_w].noalias() += c.norm1_out.transpose() * dpre;
  g[n.f1_b].row(0) += dpre.colwise().sum();
  const Matrix dnorm1 = dr2 + dpre * p[n.f1_w].transpose();

  const Matrix dr1 = layer_norm_backward(dnorm1, p[n.n1_g], c.norm1, g[n.n1_g], g[n.n1_b]);
  g[n.o_w].noalias() += c.context.transpose() * dr1;
  g[n.o_b].row(0) += dr1.colwise().sum();
  const Matrix dcontext = dr1 * p[n.o_w].transpose();

  Matrix dq = Matrix::Zero(x.rows(), x.cols());
  Matrix dk = Matrix::Zero(x.rows(), x.cols());
  Matrix dv = Matrix::Zero(x.rows(), x.cols());
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    const Matrix& probs = c.probs[h];
    const Matrix dctx = dcontext.middleCols(off, dh);
    const Matrix dprobs = dctx * c.v.middleCols(off, dh).transpose();
    dv.middleCols(off, dh) = probs.transpose() * dctx;
    const Eigen::VectorXd row_dot = dprobs.cwiseProduct(probs).rowwise().sum();
    const Matrix dscores = (probs.array() * (dprobs.colwise() - row_dot).array()).matrix() * scale;
    dq.middleCols(off, dh) = dscores * c.k.middleCols(off, dh);
    dk.middleCols(off, dh) = dscores.transpose() * c.q.middleCols(off, dh);
  }
  g[n.q_w].noalias() += x.transpose() * dq;
  g[n.q_b].row(0) += dq.colwise().sum();
  g[n.k_w].noalias() += x.transpose() * dk;
  g[n.k_b].row(0) += dk.colwise().sum();
  g[n.v_w].noalias() += x.transpose() * dv;
  g[n.v_b].row(0) += dv.colwise().sum();

  Matrix dx = dr1;
  dx.noalias() += dq * p[n.q_w].transpose();
  dx.noalias() += dk * p[n.k_w].transpose();
  dx.noalias() += dv * p[n.v_w].transpose();
  return dx;
}

RowVector dropout_mask(Eigen::Index n, double rate, Mode mode, Rng* rng) {
  RowVector mask = RowVector::Ones(n);
  if (mode != Mode::Train || rate <= 0.0) return mask;
  if (rng == nullptr) {
    throw ModelError(ModelErrc::PreconditionViolation, "train mode needs a dropout generator");
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < n; ++i) mask(i) = rng->uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

void check_span(const TokenSpan& span, std::size_t T, const char* what) {
  if (span.begin >= span.end || span.end > T) {
    throw ModelError(ModelErrc::SpanOutOfRange,
                     std::string(what) + " span [" + std::to_string(span.begin) + "," +
                         std::to_string(span.end) + ") is not inside a sequence of length " +
                         std::to_string(T));
  }
}

RowVector span_mean(const Matrix& h, const TokenSpan& span) {
  return h.middleRows(static_cast<Eigen::Index>(span.begin), static_cast<Eigen::Index>(span.size()))
             .colwise()
             .mean();
}

void finish_trace(ForwardTrace& trace) { trace.probabilities = softmax(trace.logits); }

}  // namespace

RowVector softmax(const RowVector& logits) {
  const double max = logits.maxCoeff();
  RowVector e = (logits.array() - max).exp();
  return e / e.sum();
}

int argmax(const RowVector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

HiddenStates encode_forward(const Params& params, std::span<const std::int32_t> ids) {
  const ModelConfig& cfg = params.config();
  const auto T = static_cast<Eigen::Index>(ids.size());
  if (ids.empty()) throw ModelError(ModelErrc::SpanOutOfRange, "empty input sequence");
  if (ids.size() > cfg.max_positions) {
    throw ModelError(ModelErrc::SequenceTooLong,
                     "sequence of length " + std::to_string(ids.size()) + " exceeds " +
                         std::to_string(cfg.max_positions) + " positions");
  }
  const Matrix& tok = params["embed.token"];
  const Matrix& pos = params["embed.position"];
  Matrix embedded(T, static_cast<Eigen::Index>(cfg.hidden));
  std::vector<bool> is_pad(ids.size());
  for (Eigen::Index t = 0; t < T; ++t) {
    const std::int32_t id = ids[static_cast<std::size_t>(t)];
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw ModelError(ModelErrc::IdOutOfRange,
                       "token id " + std::to_string(id) + " outside vocabulary of " +
                           std::to_string(cfg.vocab_size));
    }
    is_pad[static_cast<std::size_t>(t)] = id == Vocabulary::kPad;
    embedded.row(t) = tok.row(id) + pos.row(t);
  }

  auto cache = std::make_shared<EncoderCache>();
  HiddenStates states;
  states.ids.assign(ids.begin(), ids.end());
  states.layers.reserve(cfg.layers + 1);
  states.layers.push_back(layer_norm(embedded, params["embed.norm.gain"],
                                     params["embed.norm.bias"], cache->embed_norm));
  cache->layers.resize(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    states.layers.push_back(layer_forward(params, l, states.layers.back(), is_pad, cache->layers[l]));
  }
  states.cache = std::move(cache);
  return states;
}

Matrix stack_last_four(const HiddenStates& states) {
  if (states.layers.size() < 5) {
    throw ModelError(ModelErrc::InsufficientLayers, "stacking needs at least 4 encoder layers");
  }
  const auto T = states.layers.back().rows();
  const auto H = states.layers.back().cols();
  const std::size_t L = states.layers.size() - 1;
  Matrix stacked(4 * T, H);
  for (std::size_t b = 0; b < 4; ++b) {
    stacked.middleRows(static_cast<Eigen::Index>(b) * T, T) = states.layers[L - 3 + b];
  }
  return stacked;
}

ForwardTrace head_model1(const Params& params, const HiddenStates& states, Mode mode,
                         Rng* dropout_rng) {
  const ModelConfig& cfg = params.config();
  if (cfg.head != HeadKind::Model1) {
    throw ModelError(ModelErrc::InvalidConfig, "parameters were built for the rbert-cnn head");
  }
  auto c = std::make_shared<HeadCache>();
  c->head = HeadKind::Model1;
  c->cls_vec = states.layers.back().row(0);
  c->cls_mask = dropout_mask(c->cls_vec.size(), cfg.dropout, mode, dropout_rng);
  const RowVector v = c->cls_vec.cwiseProduct(c->cls_mask);
  c->dense_out = affine(v, params["model1.dense.weight"], params["model1.dense.bias"])
                     .array()
                     .tanh()
                     .matrix();
  c->dense_mask = dropout_mask(c->dense_out.size(), cfg.dropout, mode, dropout_rng);
  c->fused = c->dense_out;

  ForwardTrace trace;
  trace.logits = affine(c->dense_out.cwiseProduct(c->dense_mask), params["model1.out.weight"],
                        params["model1.out.bias"]);
  trace.fused = c->fused;
  trace.cache = std::move(c);
  finish_trace(trace);
  return trace;
}

ForwardTrace head_rbert_cnn(const Params& params, const HiddenStates& states, TokenSpan chem,
                            TokenSpan prot, Mode mode, Rng* dropout_rng) {
  const ModelConfig& cfg = params.config();
  if (cfg.head != HeadKind::RbertCnn) {
    throw ModelError(ModelErrc::InvalidConfig, "parameters were built for the model1 head");
  }
  if (states.layers.size() < 5) {
    throw ModelError(ModelErrc::InsufficientLayers, "the CNN head needs at least 4 encoder layers");
  }
  const std::size_t T = states.length();
  check_span(chem, T, "chemical");
  check_span(prot, T, "protein");
  for (const TokenSpan* s : {&chem, &prot}) {
    for (std::size_t t = s->begin; t < s->end && t < states.ids.size(); ++t) {
      if (states.ids[t] == Vocabulary::kPad) {
        throw ModelError(ModelErrc::SpanOutOfRange, "entity span covers padding");
      }
    }
  }

  auto c = std::make_shared<HeadCache>();
  c->head = HeadKind::RbertCnn;
  c->chem = chem;
  c->prot = prot;
  c->stacked = stack_last_four(states);
  const auto H = c->stacked.cols();
  const auto rows = c->stacked.rows();
  const auto F = static_cast<Eigen::Index>(cfg.cnn_filters);

  ForwardTrace trace;
  c->pooled.resize(static_cast<Eigen::Index>(cfg.pooled_features()));
  c->argmax.resize(cfg.cnn_windows.size());
  for (std::size_t w = 0; w < cfg.cnn_windows.size(); ++w) {
    const auto k = static_cast<Eigen::Index>(cfg.cnn_windows[w]);
    const Eigen::Index positions = rows - k + 1;
    if (positions < 1) {
      throw ModelError(ModelErrc::SpanOutOfRange, "sequence too short for window " +
                                                      std::to_string(k));
    }
    // Row i of the unfolded view is the k consecutive stacked rows starting
    // at i, flattened; the stacked matrix is row-major so this is a strided map.
    const Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> windows(
        c->stacked.data(), positions, k * H, Eigen::OuterStride<>(H));
    const std::string p = "cnn.window" + std::to_string(k) + ".";
    Matrix act = windows * params[p + "weight"].transpose();
    act.rowwise() += params[p + "bias"].row(0);
    act = act.cwiseMax(0.0);
    auto& arg = c->argmax[w];
    arg.resize(static_cast<std::size_t>(F));
    for (Eigen::Index f = 0; f < F; ++f) {
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < positions; ++i) {
        if (act(i, f) > act(best, f)) best = i;
      }
      arg[static_cast<std::size_t>(f)] = best;
      c->pooled(static_cast<Eigen::Index>(w) * F + f) = act(best, f);
    }
    trace.conv_activations.push_back(std::move(act));
  }
  c->cnn_out = affine(c->pooled, params["cnn.dense.weight"], params["cnn.dense.bias"])
                   .array()
                   .tanh()
                   .matrix();

  const Matrix& last = states.layers.back();
  c->chem_act = span_mean(last, chem).array().tanh().matrix();
  c->prot_act = span_mean(last, prot).array().tanh().matrix();
  const RowVector chem_out = affine(c->chem_act, params["chem.dense.weight"], params["chem.dense.bias"]);
  const RowVector prot_out = affine(c->prot_act, params["prot.dense.weight"], params["prot.dense.bias"]);

  const auto d = static_cast<Eigen::Index>(cfg.head_dim);
  c->fused.resize(static_cast<Eigen::Index>(cfg.fused_width()));
  c->fused.segment(0, d) = c->cnn_out;
  c->fused.segment(d, d) = chem_out;
  c->fused.segment(2 * d, d) = prot_out;
  if (cfg.include_cls_path) {
    c->cls_act = last.row(0).array().tanh().matrix();
    c->fused.segment(3 * d, d) =
        affine(c->cls_act, params["cls.dense.weight"], params["cls.dense.bias"]);
  }
  c->fused_mask = dropout_mask(c->fused.size(), cfg.dropout, mode, dropout_rng);

  trace.logits = affine(c->fused.cwiseProduct(c->fused_mask), params["out.weight"], params["out.bias"]);
  trace.pooled = c->pooled;
  trace.pool_winners.reserve(static_cast<std::size_t>(c->pooled.size()));
  for (std::size_t w = 0; w < c->argmax.size(); ++w) {
    for (std::size_t f = 0; f < c->argmax[w].size(); ++f) {
      const auto feature = static_cast<Eigen::Index>(w) * F + static_cast<Eigen::Index>(f);
      trace.pool_winners.push_back(c->pooled(feature) > 0.0 ? static_cast<long>(c->argmax[w][f]) : -1);
    }
  }
  trace.fused = c->fused;
  trace.cache = std::move(c);
  finish_trace(trace);
  return trace;
}

double loss(const ForwardTrace& trace, int label) {
  if (label < 0 || label >= trace.logits.size()) {
    throw ModelError(ModelErrc::PreconditionViolation, "label id out of range");
  }
  const double max = trace.logits.maxCoeff();
  const double lse = max + std::log((trace.logits.array() - max).exp().sum());
  return lse - trace.logits(label);
}

ExampleForward forward(const Params& params, const EncodedExample& example, Mode mode,
                       Rng* dropout_rng) {
  ExampleForward out;
  out.states = encode_forward(params, example.ids);
  if (params.config().head == HeadKind::Model1) {
    out.trace = head_model1(params, out.states, mode, dropout_rng);
  } else {
    out.trace = head_rbert_cnn(params, out.states, example.chem, example.prot, mode, dropout_rng);
  }
  return out;
}

void backward(const Params& params, const ExampleForward& fwd, int label, double scale,
              Params& grads) {
  const ModelConfig& cfg = params.config();
  const HeadCache& c = *fwd.trace.cache;
  const HiddenStates& states = fwd.states;
  if (!states.cache) {
    throw ModelError(ModelErrc::PreconditionViolation, "hidden states carry no backward cache");
  }
  const EncoderCache& enc = *states.cache;
  const std::size_t L = cfg.layers;
  const auto T = static_cast<Eigen::Index>(states.length());
  const auto H = static_cast<Eigen::Index>(cfg.hidden);

  RowVector dlogits = fwd.trace.probabilities;
  dlogits(label) -= 1.0;
  dlogits *= scale;

  std::vector<Matrix> dh(L + 1, Matrix::Zero(T, H));

  if (c.head == HeadKind::Model1) {
    const RowVector dense_in = c.dense_out.cwiseProduct(c.dense_mask);
    grads["model1.out.weight"].noalias() += dense_in.transpose() * dlogits;
    grads["model1.out.bias"] += dlogits;
    const RowVector ddense = (dlogits * params["model1.out.weight"].transpose())
                                 .cwiseProduct(c.dense_mask)
                                 .cwiseProduct((1.0 - c.dense_out.array().square()).matrix());
    const RowVector v = c.cls_vec.cwiseProduct(c.cls_mask);
    grads["model1.dense.weight"].noalias() += v.transpose() * ddense;
    grads["model1.dense.bias"] += ddense;
    dh[L].row(0) += (ddense * params["model1.dense.weight"].transpose()).cwiseProduct(c.cls_mask);
  } else {
    const RowVector fused_in = c.fused.cwiseProduct(c.fused_mask);
    grads["out.weight"].noalias() += fused_in.transpose() * dlogits;
    grads["out.bias"] += dlogits;
    const RowVector dfused = (dlogits * params["out.weight"].transpose()).cwiseProduct(c.fused_mask);
    const auto d = static_cast<Eigen::Index>(cfg.head_dim);

    // CNN path
    const RowVector dcnn =
        dfused.segment(0, d).cwiseProduct((1.0 - c.cnn_out.array().square()).matrix());
    grads["cnn.dense.weight"].noalias() += c.pooled.transpose() * dcnn;
    grads["cnn.dense.bias"] += dcnn;
    const RowVector dpooled = dcnn * params["cnn.dense.weight"].transpose();
    Matrix dstacked = Matrix::Zero(c.stacked.rows(), H);
    const auto F = static_cast<Eigen::Index>(cfg.cnn_filters);
    for (std::size_t w = 0; w < cfg.cnn_windows.size(); ++w) {
      const auto k = static_cast<Eigen::Index>(cfg.cnn_windows[w]);
      const std::string p = "cnn.window" + std::to_string(k) + ".";
      const Matrix& weight = params[p + "weight"];
      Matrix& gweight = grads[p + "weight"];
      Matrix& gbias = grads[p + "bias"];
      for (Eigen::Index f = 0; f < F; ++f) {
        const Eigen::Index feature = static_cast<Eigen::Index>(w) * F + f;
        // ReLU passes gradient only where the pooled activation is positive.
        if (c.pooled(feature) <= 0.0) continue;
        const double g = dpooled(feature);
        const Eigen::Index i = c.argmax[w][static_cast<std::size_t>(f)];
        const Eigen::Map<const RowVector> window(c.stacked.data() + i * H, k * H);
        Eigen::Map<RowVector> dwindow(dstacked.data() + i * H, k * H);
        gbias(0, f) += g;
        gweight.row(f) += g * window;
        dwindow += g * weight.row(f);
      }
    }
    for (std::size_t b = 0; b < 4; ++b) {
      dh[L - 3 + b] += dstacked.middleRows(static_cast<Eigen::Index>(b) * T, T);
    }

    // Entity paths: tanh(mean) -> dense.
    auto entity = [&](const char* name, const RowVector& act, const TokenSpan& span,
                      Eigen::Index offset) {
      const RowVector dout = dfused.segment(offset, d);
      const std::string p = std::string(name) + ".dense.";
      grads[p + "weight"].noalias() += act.transpose() * dout;
      grads[p + "bias"] += dout;
      const RowVector dact = (dout * params[p + "weight"].transpose())
                                 .cwiseProduct((1.0 - act.array().square()).matrix());
      const double inv = 1.0 / static_cast<double>(span.size());
      for (std::size_t t = span.begin; t < span.end; ++t) {
        dh[L].row(static_cast<Eigen::Index>(t)) += inv * dact;
      }
    };
    entity("chem", c.chem_act, c.chem, d);
    entity("prot", c.prot_act, c.prot, 2 * d);
    if (cfg.include_cls_path) {
      entity("cls", c.cls_act, TokenSpan{0, 1}, 3 * d);
    }
  }

  for (std::size_t l = L; l >= 1; --l) {
    dh[l - 1] += layer_backward(params, l - 1, states.layers[l - 1], enc.layers[l - 1], dh[l], grads);
  }
  const Matrix dembed = layer_norm_backward(dh[0], params["embed.norm.gain"], enc.embed_norm,
                                            grads["embed.norm.gain"], grads["embed.norm.bias"]);
  Matrix& gtok = grads["embed.token"];
  Matrix& gpos = grads["embed.position"];
  for (Eigen::Index t = 0; t < T; ++t) {
    gtok.row(states.ids[static_cast<std::size_t>(t)]) += dembed.row(t);
    gpos.row(t) += dembed.row(t);
  }
}

LossAndGrad loss_and_grad(const Params& params, std::span<const EncodedExample> batch, Mode mode,
                          Rng* dropout_rng) {
  if (batch.empty()) throw ModelError(ModelErrc::PreconditionViolation, "empty batch");
  LossAndGrad out;
  out.grads = params.zeros_like();
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& example : batch) {
    const ExampleForward fwd = forward(params, example, mode, dropout_rng);
    out.loss += scale * loss(fwd.trace, example.label);
    if (argmax(fwd.trace.logits) == example.label) ++out.correct;
    backward(params, fwd, example.label, scale, out.grads);
  }
  return out;
}

GradCheckReport grad_check(const Params& params, const EncodedExample& example, double eps,
                           const GradCheckOptions& options) {
  if (!(eps > 0.0)) {
    throw ModelError(ModelErrc::PreconditionViolation, "grad_check needs eps > 0");
  }
  const Params analytic =
      options.analytic ? options.analytic(params, example)
                       : loss_and_grad(params, std::span(&example, 1), Mode::Eval).grads;

  Params probe = params;
  const auto baseline = forward(probe, example, Mode::Eval).trace.pool_winners;
  // Returns nullopt when the perturbed point pools from different positions.
  auto objective = [&]() -> std::optional<double> {
    const auto trace = forward(probe, example, Mode::Eval).trace;
    if (trace.pool_winners != baseline) return std::nullopt;
    return loss(trace, example.label);
  };

  // Spread the budget over tensors by size, with a minimum per tensor so
  // every tensor is exercised.
  const auto& tensors = probe.tensors();
  const std::size_t total = probe.parameter_count();
  const std::size_t min_per_tensor = 4;
  Rng rng(options.seed);
  GradCheckReport report;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    const std::size_t size = tensors[ti].size();
    const std::size_t share =
        (options.min_coordinates * size + total - 1) / std::max<std::size_t>(total, 1);
    const std::size_t n = std::min(size, std::max(min_per_tensor, share));
    std::vector<std::size_t> coords(size);
    for (std::size_t i = 0; i < size; ++i) coords[i] = i;
    double worst = 0.0;
    std::size_t checked = 0;
    // Lazy Fisher-Yates: draw until n smooth coordinates or the tensor runs out.
    for (std::size_t s = 0; s < size && checked < n; ++s) {
      std::swap(coords[s], coords[s + rng.below(size - s)]);
      double& value = probe.tensors()[ti].value.data()[coords[s]];
      const double saved = value;
      value = saved + eps;
      const auto up = objective();
      value = saved - eps;
      const auto down = up ? objective() : std::nullopt;
      value = saved;
      if (!up || !down) {
        ++report.kinks_skipped;
        continue;
      }
      const double numeric = (*up - *down) / (2.0 * eps);
      const double a = analytic.tensors()[ti].value.data()[coords[s]];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
      ++checked;
    }
    report.coordinates += checked;
    report.per_tensor[tensors[ti].name] = worst;
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  return report;
}

}  // namespace dtirex
