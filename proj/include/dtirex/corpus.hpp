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
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dtirex/common.hpp"

namespace dtirex {

enum class CorpusErrc {
  Io,
  MalformedLine,
  DuplicatePmid,
  UnknownEntityType,
  BadOffsets,
  UnknownLabel,
  BadArgPrefix,
  DuplicateEntityId,
  OrphanEntity,
  OrphanRelation,
  OffsetMismatch,
  ArgKindMismatch,
};
using CorpusError = CodedError<CorpusErrc>;

enum class EntityKind { Chemical, Protein };

// The 13 corpus relation types in the row order of the corpus statistics
// table, followed by the synthetic Other class for unrelated pairs. The
// first ten are the classes the classifier is trained and scored on.
enum class RelationLabel : std::uint8_t {
  Antagonist,
  Inhibitor,
  Agonist,
  Activator,
  IndirectUpregulator,
  IndirectDownregulator,
  PartOf,
  DirectRegulator,
  Substrate,
  ProductOf,
  AgonistActivator,
  AgonistInhibitor,
  SubstrateProductOf,
  Other,
};

inline constexpr std::size_t kNumCorpusLabels = 13;
inline constexpr std::size_t kNumEvaluatedLabels = 10;
// Ten evaluated relations plus Other.
inline constexpr std::size_t kNumClasses = 11;

inline constexpr std::array<RelationLabel, kNumCorpusLabels> kCorpusLabels = {
    RelationLabel::Antagonist,         RelationLabel::Inhibitor,
    RelationLabel::Agonist,            RelationLabel::Activator,
    RelationLabel::IndirectUpregulator, RelationLabel::IndirectDownregulator,
    RelationLabel::PartOf,             RelationLabel::DirectRegulator,
    RelationLabel::Substrate,          RelationLabel::ProductOf,
    RelationLabel::AgonistActivator,   RelationLabel::AgonistInhibitor,
    RelationLabel::SubstrateProductOf,
};

std::string_view label_name(RelationLabel label);
// Case-sensitive. Accepts the 13 corpus labels; "Other" only when
// allow_other is set.
std::optional<RelationLabel> parse_label(std::string_view name, bool allow_other = false);

// AGONIST-ACTIVATOR, AGONIST-INHIBITOR and SUBSTRATE_PRODUCT-OF: too rare to
// train on, removed during preprocessing.
constexpr bool is_deleted_label(RelationLabel label) {
  return label == RelationLabel::AgonistActivator || label == RelationLabel::AgonistInhibitor ||
         label == RelationLabel::SubstrateProductOf;
}
constexpr bool is_evaluated_label(RelationLabel label) {
  return static_cast<std::size_t>(label) < kNumEvaluatedLabels;
}

// Class id used by the classifier: 0..9 for the evaluated relations, 10 for Other.
int class_id(RelationLabel label);
RelationLabel class_label(int id);

struct Document {
  std::string pmid;
  std::string title;
  std::string abstract;
};

struct EntityMention {
  std::string pmid;
  std::string eid;
  EntityKind kind = EntityKind::Chemical;
  // Type column as written in the file (CHEMICAL, GENE, GENE-Y, GENE-N).
  // Only serialization looks at it; everything else uses `kind`.
  std::string type_tag;
  // Unicode scalar offsets into the flat text, half-open.
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  bool overlaps(const EntityMention& other) const {
    return start < other.end && other.start < end;
  }
};

struct RelationAnnotation {
  std::string pmid;
  RelationLabel label = RelationLabel::Other;
  std::string arg1;
  std::string arg2;

  auto operator<=>(const RelationAnnotation&) const = default;
};

// Reads lines, stripping a trailing "\r" so CRLF and LF files parse alike.
std::vector<std::string> read_lines(std::istream& in);

std::vector<Document> parse_abstracts(std::istream& in);
std::vector<EntityMention> parse_entities(std::istream& in);
std::vector<RelationAnnotation> parse_relations(std::istream& in);

void write_abstracts(std::ostream& out, const std::vector<Document>& docs);
void write_entities(std::ostream& out, const std::vector<EntityMention>& ents);
void write_relations(std::ostream& out, const std::vector<RelationAnnotation>& rels);

// Immutable after assembly. Documents keep input order.
class Corpus {
 public:
  const std::vector<Document>& documents() const { return documents_; }
  const Document* find(std::string_view pmid) const;
  const std::vector<EntityMention>& entities(std::string_view pmid) const;
  const std::vector<RelationAnnotation>& relations(std::string_view pmid) const;
  const EntityMention* entity(std::string_view pmid, std::string_view eid) const;

  std::size_t entity_count() const;
  std::size_t relation_count() const;

 private:
  friend Corpus assemble_corpus(std::vector<Document>, std::vector<EntityMention>,
                                std::vector<RelationAnnotation>, Diagnostics*);

  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<EntityMention>> entities_;
  std::vector<std::vector<RelationAnnotation>> relations_;
};

// Joins the three files by pmid and validates offsets, entity references and
// argument kinds. Exact duplicate relation lines are dropped with a warning.
Corpus assemble_corpus(std::vector<Document> docs, std::vector<EntityMention> ents,
                       std::vector<RelationAnnotation> rels, Diagnostics* diag = nullptr);

struct CorpusPaths {
  std::filesystem::path abstracts;
  std::filesystem::path entities;
  std::filesystem::path relations;  // optional; empty means no gold relations
};

Corpus load_corpus(const CorpusPaths& paths, Diagnostics* diag = nullptr);

struct CorpusStats {
  std::size_t n_documents = 0;
  std::size_t n_chemicals = 0;
  std::size_t n_proteins = 0;
  std::size_t n_positive_relations = 0;
  std::map<RelationLabel, std::size_t> per_label_counts;
};

CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace dtirex
