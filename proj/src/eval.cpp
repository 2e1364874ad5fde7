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

#include "dtirex/eval.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace dtirex {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

PRF score(const ClassCounts& c) {
  PRF out;
  out.precision = ratio(c.tp, c.tp + c.fp);
  out.recall = ratio(c.tp, c.tp + c.fn);
  const double sum = out.precision + out.recall;
  out.f1 = sum == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / sum;
  return out;
}

std::set<RelationTuple> evaluated_set(std::span<const RelationTuple> tuples) {
  std::set<RelationTuple> out;
  for (const auto& t : tuples) {
    if (is_evaluated_label(t.label)) out.insert(t);
  }
  return out;
}

}  // namespace

std::vector<PredictedRelation> predict(const Checkpoint& ckpt,
                                       std::span<const EncodedExample> examples) {
  if (ckpt.vocab.size() != ckpt.model.vocab_size) {
    throw EvalError(EvalErrc::VocabMismatch, "checkpoint vocabulary and model config disagree");
  }
  if (ckpt.labels != [&] {
        auto table = default_label_table();
        table.resize(ckpt.model.n_classes);
        return table;
      }()) {
    throw EvalError(EvalErrc::VocabMismatch, "checkpoint label table is not the expected one");
  }
  std::vector<PredictedRelation> out;
  for (const auto& ex : examples) {
    for (std::int32_t id : ex.ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= ckpt.vocab.size()) {
        throw EvalError(EvalErrc::VocabMismatch,
                        "example " + ex.pmid + " uses token id " + std::to_string(id) +
                            " outside the checkpoint vocabulary");
      }
    }
    const int cls = argmax(forward(ckpt.params, ex, Mode::Eval).trace.logits);
    const RelationLabel label = class_label(cls);
    if (label == RelationLabel::Other) continue;
    out.push_back({ex.pmid, label, ex.chem_eid, ex.prot_eid});
  }
  return out;
}

ClassCounts ConfusionCounts::total() const {
  ClassCounts t;
  for (const auto& c : per_class) {
    t.tp += c.tp;
    t.fp += c.fp;
    t.fn += c.fn;
  }
  return t;
}

ConfusionCounts confusion(std::span<const RelationTuple> pred, std::span<const RelationTuple> gold) {
  const auto p = evaluated_set(pred);
  const auto g = evaluated_set(gold);
  ConfusionCounts counts;
  for (const auto& t : p) {
    (g.count(t) ? counts[t.label].tp : counts[t.label].fp) += 1;
  }
  for (const auto& t : g) {
    if (!p.count(t)) counts[t.label].fn += 1;
  }
  return counts;
}

MetricReport micro_metrics(const ConfusionCounts& counts) {
  MetricReport r;
  for (std::size_t i = 0; i < kNumEvaluatedLabels; ++i) r.per_class[i] = score(counts.per_class[i]);
  r.micro = score(counts.total());
  return r;
}

void write_predictions(std::ostream& out, std::span<const PredictedRelation> preds) {
  for (const auto& p : preds) {
    out << p.pmid << '\t' << label_name(p.label) << "\tArg1:" << p.arg1 << "\tArg2:" << p.arg2
        << '\n';
  }
  if (!out) throw EvalError(EvalErrc::Io, "failed writing predictions");
}

std::vector<RelationTuple> read_relation_tuples(std::istream& in) {
  std::vector<RelationTuple> out;
  for (auto& r : parse_relations(in)) {
    out.push_back({std::move(r.pmid), r.label, std::move(r.arg1), std::move(r.arg2)});
  }
  return out;
}

std::string format_score(double value) {
  const double rounded = std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", rounded);
  return buf;
}

std::string report(const MetricReport& metrics) {
  constexpr int kNameWidth = 46;
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-*s %5s %5s %5s\n", kNameWidth, "Relation", "P", "R", "F1");
  out << line;
  auto row = [&](std::string_view name, const PRF& s) {
    std::snprintf(line, sizeof(line), "%-*.*s %5s %5s %5s\n", kNameWidth,
                  static_cast<int>(name.size()), name.data(), format_score(s.precision).c_str(),
                  format_score(s.recall).c_str(), format_score(s.f1).c_str());
    out << line;
  };
  for (std::size_t i = 0; i < kNumEvaluatedLabels; ++i) {
    row(label_name(static_cast<RelationLabel>(i)), metrics.per_class[i]);
  }
  row(kGlobalRowName, metrics.micro);
  return out.str();
}

}  // namespace dtirex
