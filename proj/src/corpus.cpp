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

#include "dtirex/corpus.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

#include "dtirex/preprocess.hpp"
#include "dtirex/utf8.hpp"

namespace dtirex {

namespace {

constexpr std::array<std::string_view, 14> kLabelNames = {
    "ANTAGONIST", "INHIBITOR",          "AGONIST",           "ACTIVATOR",
    "INDIRECT-UPREGULATOR", "INDIRECT-DOWNREGULATOR", "PART-OF", "DIRECT-REGULATOR",
    "SUBSTRATE",  "PRODUCT-OF",         "AGONIST-ACTIVATOR", "AGONIST-INHIBITOR",
    "SUBSTRATE_PRODUCT-OF", "Other",
};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw CorpusError(CorpusErrc::MalformedLine,
                    "malformed line " + std::to_string(line_no) + ": " + why);
}

std::size_t parse_offset(std::string_view field, std::size_t line_no) {
  std::size_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    malformed(line_no, "offset '" + std::string(field) + "' is not a non-negative integer");
  }
  return value;
}

template <typename Record, typename ParseFn>
std::vector<Record> parse_lines(std::istream& in, ParseFn&& parse_one) {
  std::vector<Record> out;
  const auto lines = read_lines(in);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    out.push_back(parse_one(lines[i], i + 1));
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError(CorpusErrc::Io, "cannot open " + path.string());
  return in;
}

}  // namespace

std::string_view label_name(RelationLabel label) {
  return kLabelNames.at(static_cast<std::size_t>(label));
}

std::optional<RelationLabel> parse_label(std::string_view name, bool allow_other) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) {
      const auto label = static_cast<RelationLabel>(i);
      if (label == RelationLabel::Other && !allow_other) return std::nullopt;
      return label;
    }
  }
  return std::nullopt;
}

int class_id(RelationLabel label) {
  if (label == RelationLabel::Other) return static_cast<int>(kNumEvaluatedLabels);
  if (!is_evaluated_label(label)) {
    throw Error("label " + std::string(label_name(label)) + " has no classifier class");
  }
  return static_cast<int>(label);
}

RelationLabel class_label(int id) {
  if (id < 0 || id > static_cast<int>(kNumEvaluatedLabels)) {
    throw Error("class id " + std::to_string(id) + " out of range");
  }
  return id == static_cast<int>(kNumEvaluatedLabels) ? RelationLabel::Other
                                                     : static_cast<RelationLabel>(id);
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<Document> parse_abstracts(std::istream& in) {
  std::set<std::string, std::less<>> seen;
  return parse_lines<Document>(in, [&](const std::string& line, std::size_t line_no) {
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      malformed(line_no, "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) malformed(line_no, "empty pmid");
    if (fields[1].empty()) malformed(line_no, "empty title");
    if (!seen.emplace(fields[0]).second) {
      throw CorpusError(CorpusErrc::DuplicatePmid, "duplicate pmid " + std::string(fields[0]) +
                                                       " on line " + std::to_string(line_no));
    }
    return Document{std::string(fields[0]), std::string(fields[1]), std::string(fields[2])};
  });
}

std::vector<EntityMention> parse_entities(std::istream& in) {
  return parse_lines<EntityMention>(in, [](const std::string& line, std::size_t line_no) {
    const auto fields = split_tabs(line);
    if (fields.size() != 6) {
      malformed(line_no, "expected 6 tab-separated fields, found " + std::to_string(fields.size()));
    }
    EntityMention m;
    m.pmid = fields[0];
    m.eid = fields[1];
    m.type_tag = fields[2];
    if (m.pmid.empty() || m.eid.empty()) malformed(line_no, "empty pmid or entity id");
    if (m.type_tag == "CHEMICAL") {
      m.kind = EntityKind::Chemical;
    } else if (m.type_tag == "GENE" || m.type_tag == "GENE-Y" || m.type_tag == "GENE-N") {
      m.kind = EntityKind::Protein;
    } else {
      throw CorpusError(CorpusErrc::UnknownEntityType,
                        "unknown entity type '" + m.type_tag + "' on line " + std::to_string(line_no));
    }
    m.start = parse_offset(fields[3], line_no);
    m.end = parse_offset(fields[4], line_no);
    if (m.start >= m.end) {
      throw CorpusError(CorpusErrc::BadOffsets, "entity " + m.eid + " on line " +
                                                    std::to_string(line_no) + " has start >= end");
    }
    m.surface = fields[5];
    return m;
  });
}

std::vector<RelationAnnotation> parse_relations(std::istream& in) {
  return parse_lines<RelationAnnotation>(in, [](const std::string& line, std::size_t line_no) {
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      malformed(line_no, "expected 4 tab-separated fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) malformed(line_no, "empty pmid");
    const auto label = parse_label(fields[1]);
    if (!label) {
      throw CorpusError(CorpusErrc::UnknownLabel, "unknown relation label '" +
                                                      std::string(fields[1]) + "' on line " +
                                                      std::to_string(line_no));
    }
    auto strip = [&](std::string_view field, std::string_view prefix) {
      if (!field.starts_with(prefix) || field.size() == prefix.size()) {
        throw CorpusError(CorpusErrc::BadArgPrefix, "expected '" + std::string(prefix) +
                                                        "<eid>' on line " + std::to_string(line_no) +
                                                        ", found '" + std::string(field) + "'");
      }
      return std::string(field.substr(prefix.size()));
    };
    return RelationAnnotation{std::string(fields[0]), *label, strip(fields[2], "Arg1:"),
                              strip(fields[3], "Arg2:")};
  });
}

void write_abstracts(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& d : docs) out << d.pmid << '\t' << d.title << '\t' << d.abstract << '\n';
}

void write_entities(std::ostream& out, const std::vector<EntityMention>& ents) {
  for (const auto& e : ents) {
    out << e.pmid << '\t' << e.eid << '\t' << e.type_tag << '\t' << e.start << '\t' << e.end
        << '\t' << e.surface << '\n';
  }
}

void write_relations(std::ostream& out, const std::vector<RelationAnnotation>& rels) {
  for (const auto& r : rels) {
    out << r.pmid << '\t' << label_name(r.label) << "\tArg1:" << r.arg1 << "\tArg2:" << r.arg2
        << '\n';
  }
}

const Document* Corpus::find(std::string_view pmid) const {
  auto it = index_.find(std::string(pmid));
  return it == index_.end() ? nullptr : &documents_[it->second];
}

const std::vector<EntityMention>& Corpus::entities(std::string_view pmid) const {
  static const std::vector<EntityMention> kEmpty;
  auto it = index_.find(std::string(pmid));
  return it == index_.end() ? kEmpty : entities_[it->second];
}

const std::vector<RelationAnnotation>& Corpus::relations(std::string_view pmid) const {
  static const std::vector<RelationAnnotation> kEmpty;
  auto it = index_.find(std::string(pmid));
  return it == index_.end() ? kEmpty : relations_[it->second];
}

const EntityMention* Corpus::entity(std::string_view pmid, std::string_view eid) const {
  for (const auto& e : entities(pmid)) {
    if (e.eid == eid) return &e;
  }
  return nullptr;
}

std::size_t Corpus::entity_count() const {
  std::size_t n = 0;
  for (const auto& v : entities_) n += v.size();
  return n;
}

std::size_t Corpus::relation_count() const {
  std::size_t n = 0;
  for (const auto& v : relations_) n += v.size();
  return n;
}

Corpus assemble_corpus(std::vector<Document> docs, std::vector<EntityMention> ents,
                       std::vector<RelationAnnotation> rels, Diagnostics* diag) {
  Corpus corpus;
  corpus.documents_ = std::move(docs);
  for (std::size_t i = 0; i < corpus.documents_.size(); ++i) {
    const auto& pmid = corpus.documents_[i].pmid;
    if (!corpus.index_.emplace(pmid, i).second) {
      throw CorpusError(CorpusErrc::DuplicatePmid, "duplicate pmid " + pmid);
    }
  }
  corpus.entities_.resize(corpus.documents_.size());
  corpus.relations_.resize(corpus.documents_.size());

  std::vector<std::u32string> flat(corpus.documents_.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    flat[i] = merge_title_abstract(corpus.documents_[i]).text;
  }

  std::vector<std::unordered_map<std::string, EntityKind>> kinds(corpus.documents_.size());
  for (auto& e : ents) {
    auto it = corpus.index_.find(e.pmid);
    if (it == corpus.index_.end()) {
      throw CorpusError(CorpusErrc::OrphanEntity,
                        "entity " + e.eid + " references unknown pmid " + e.pmid);
    }
    const std::size_t doc = it->second;
    if (!kinds[doc].emplace(e.eid, e.kind).second) {
      throw CorpusError(CorpusErrc::DuplicateEntityId,
                        "duplicate entity id " + e.eid + " in pmid " + e.pmid);
    }
    const std::u32string& text = flat[doc];
    const std::u32string expected = utf8::decode(e.surface);
    const std::u32string found =
        e.start < text.size() ? text.substr(e.start, e.end - e.start) : std::u32string();
    if (e.end > text.size() || found != expected) {
      throw CorpusError(CorpusErrc::OffsetMismatch,
                        "entity " + e.eid + " in pmid " + e.pmid + " [" + std::to_string(e.start) +
                            "," + std::to_string(e.end) + "): expected '" + e.surface +
                            "', found '" + utf8::encode(found) + "'");
    }
    corpus.entities_[doc].push_back(std::move(e));
  }

  std::vector<std::set<std::tuple<RelationLabel, std::string, std::string>>> seen(
      corpus.documents_.size());
  for (auto& r : rels) {
    auto it = corpus.index_.find(r.pmid);
    if (it == corpus.index_.end()) {
      throw CorpusError(CorpusErrc::OrphanRelation,
                        "relation references unknown pmid " + r.pmid);
    }
    const std::size_t doc = it->second;
    auto check_arg = [&](const std::string& eid, EntityKind want, const char* role) {
      auto k = kinds[doc].find(eid);
      if (k == kinds[doc].end()) {
        throw CorpusError(CorpusErrc::OrphanRelation, std::string(role) + " " + eid +
                                                          " of a relation in pmid " + r.pmid +
                                                          " is not a known entity");
      }
      if (k->second != want) {
        throw CorpusError(CorpusErrc::ArgKindMismatch,
                          std::string(role) + " " + eid + " in pmid " + r.pmid + " must be a " +
                              (want == EntityKind::Chemical ? "chemical" : "protein"));
      }
    };
    check_arg(r.arg1, EntityKind::Chemical, "Arg1");
    check_arg(r.arg2, EntityKind::Protein, "Arg2");
    if (!seen[doc].emplace(r.label, r.arg1, r.arg2).second) {
      warn(diag, "duplicate relation " + std::string(label_name(r.label)) + " " + r.arg1 + " " +
                     r.arg2 + " in pmid " + r.pmid + " dropped");
      count(diag, "duplicate relations dropped");
      continue;
    }
    corpus.relations_[doc].push_back(std::move(r));
  }
  return corpus;
}

Corpus load_corpus(const CorpusPaths& paths, Diagnostics* diag) {
  auto abstracts = open_input(paths.abstracts);
  auto docs = parse_abstracts(abstracts);
  auto entities = open_input(paths.entities);
  auto ents = parse_entities(entities);
  std::vector<RelationAnnotation> rels;
  if (!paths.relations.empty()) {
    auto relations = open_input(paths.relations);
    rels = parse_relations(relations);
  }
  return assemble_corpus(std::move(docs), std::move(ents), std::move(rels), diag);
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.n_documents = corpus.documents().size();
  for (RelationLabel label : kCorpusLabels) stats.per_label_counts[label] = 0;
  for (const auto& doc : corpus.documents()) {
    for (const auto& e : corpus.entities(doc.pmid)) {
      (e.kind == EntityKind::Chemical ? stats.n_chemicals : stats.n_proteins) += 1;
    }
    for (const auto& r : corpus.relations(doc.pmid)) {
      if (r.label == RelationLabel::Other) continue;
      stats.per_label_counts[r.label] += 1;
      stats.n_positive_relations += 1;
    }
  }
  return stats;
}

}  // namespace dtirex
