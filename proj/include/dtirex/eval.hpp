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

#include <array>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dtirex/corpus.hpp"
#include "dtirex/train.hpp"

namespace dtirex {

enum class EvalErrc { VocabMismatch, Io };
using EvalError = CodedError<EvalErrc>;

// One predicted (or gold) relation tuple. Other never appears here.
struct PredictedRelation {
  std::string pmid;
  RelationLabel label = RelationLabel::Antagonist;
  std::string arg1;
  std::string arg2;

  auto operator<=>(const PredictedRelation&) const = default;
};

using RelationTuple = PredictedRelation;

// Eval-mode argmax per example (ties go to the lowest class id); examples
// predicted as Other produce no tuple. Output follows input order.
std::vector<PredictedRelation> predict(const Checkpoint& ckpt,
                                       std::span<const EncodedExample> examples);

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct ConfusionCounts {
  std::array<ClassCounts, kNumEvaluatedLabels> per_class{};

  ClassCounts& operator[](RelationLabel l) { return per_class.at(static_cast<std::size_t>(l)); }
  const ClassCounts& operator[](RelationLabel l) const {
    return per_class.at(static_cast<std::size_t>(l));
  }
  ClassCounts total() const;
};

// Set semantics on exact (pmid, label, arg1, arg2) tuples; tuples whose label
// is not one of the ten evaluated classes are ignored on both sides.
ConfusionCounts confusion(std::span<const RelationTuple> pred, std::span<const RelationTuple> gold);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  PRF micro;
  std::array<PRF, kNumEvaluatedLabels> per_class{};
};

// Micro scores pool TP/FP/FN over the ten classes. Any 0/0 is taken as 0.
MetricReport micro_metrics(const ConfusionCounts& counts);

// pmid TAB label TAB Arg1:<eid> TAB Arg2:<eid>, LF-terminated.
void write_predictions(std::ostream& out, std::span<const PredictedRelation> preds);
std::vector<RelationTuple> read_relation_tuples(std::istream& in);

inline constexpr const char* kGlobalRowName = "Global results across all interactions types";

// Rounds half-up to two decimals.
std::string format_score(double value);

// Per-class P/R/F1 rows in label order and a closing global row.
std::string report(const MetricReport& metrics);

}  // namespace dtirex
