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

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dtirex/common.hpp"
#include "dtirex/corpus.hpp"

namespace dtirex {

enum class PreprocessErrc { Overlap, InvalidConfig, SpanOutsideSentence, MalformedExample };
using PreprocessError = CodedError<PreprocessErrc>;

// Title and abstract joined by a single space. Corpus entity offsets index
// this text directly.
struct FlatText {
  std::string pmid;
  std::u32string text;
  std::size_t title_length = 0;

  std::string utf8() const;
};

FlatText merge_title_abstract(const Document& doc);

// Half-open range of Unicode scalar offsets.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool contains(std::size_t s, std::size_t e) const { return start <= s && e <= end; }
  auto operator<=>(const CharSpan&) const = default;
};

using SentenceSpan = CharSpan;

struct SplitterConfig {
  // Words after which a period never ends a sentence ("in vivo. Studies").
  std::vector<std::string> non_terminal_tokens{"vivo", "Vmax"};
  // Extra split-suppressing tokens, e.g. "e.g" or "Fig". Matched against the
  // alphanumeric word before the terminator and against the full
  // whitespace-delimited token.
  std::vector<std::string> abbreviations;

  void validate() const;
};

// Rule-based splitter: a boundary follows '.', '!' or '?' when the next
// characters are whitespace and then an uppercase letter or digit, unless the
// word before the terminator is listed in the config. The title is always a
// sentence of its own. Spans are trimmed; empty spans are dropped.
std::vector<SentenceSpan> split_sentences(const FlatText& flat, const SplitterConfig& cfg);

struct CandidatePair {
  std::string pmid;
  SentenceSpan sentence;
  EntityMention chem;
  EntityMention prot;
};

// Every chemical x protein pair whose mentions both lie inside one sentence.
// Overlapping pairs are skipped and counted under "overlapping pairs skipped".
std::vector<CandidatePair> generate_candidates(const FlatText& flat,
                                               std::span<const EntityMention> entities,
                                               std::span<const SentenceSpan> sentences,
                                               Diagnostics* diag = nullptr);

struct TaggedText {
  std::u32string text;
  CharSpan chem;  // includes the '$' markers
  CharSpan prot;  // includes the '#' markers
};

// Wraps the chemical as $surface$ and the protein as #surface# inside the
// sentence. Surfaces are kept verbatim.
TaggedText tag_entities(const FlatText& flat, const SentenceSpan& sentence,
                        const EntityMention& chem, const EntityMention& prot,
                        Diagnostics* diag = nullptr);

struct RelationExample {
  std::string pmid;
  std::string chem_eid;
  std::string prot_eid;
  std::string tagged_text;  // UTF-8
  RelationLabel label = RelationLabel::Other;
  CharSpan chem_span;  // scalar offsets into tagged_text, markers included
  CharSpan prot_span;
};

// Attaches gold labels to candidate pairs. Unannotated pairs become Other;
// pairs annotated only with deleted labels are dropped; when several kept
// labels apply, the one earliest in RelationLabel order wins.
std::vector<RelationExample> label_candidates(const FlatText& flat,
                                              std::span<const CandidatePair> pairs,
                                              std::span<const RelationAnnotation> gold,
                                              Diagnostics* diag = nullptr);

struct PreprocessStats {
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t candidates = 0;
  std::size_t examples = 0;
  std::size_t cross_sentence_skipped = 0;
  std::size_t rare_label_dropped = 0;
  std::size_t overlapping_skipped = 0;
  std::size_t multi_label_pairs = 0;
  std::map<RelationLabel, std::size_t> per_label;
};

struct PreprocessResult {
  std::vector<RelationExample> examples;
  PreprocessStats stats;
};

PreprocessResult preprocess_corpus(const Corpus& corpus, const SplitterConfig& cfg,
                                   Diagnostics* diag = nullptr);

// Examples TSV: pmid, chem_eid, prot_eid, label, tagged_text. Tabs and line
// breaks inside the text are written as single spaces.
void write_examples(std::ostream& out, std::span<const RelationExample> examples);

// Recovers entity spans from the markers. Lines whose text does not hold
// exactly two '$' and two '#' characters are ambiguous; they are skipped and
// counted under "ambiguous marker lines skipped".
std::vector<RelationExample> read_examples(std::istream& in, Diagnostics* diag = nullptr);

}  // namespace dtirex
