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

#include "dtirex/preprocess.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

#include "dtirex/utf8.hpp"

namespace dtirex {

namespace {

bool is_terminator(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

bool listed(const std::vector<std::string>& list, const std::string& word) {
  return !word.empty() && std::find(list.begin(), list.end(), word) != list.end();
}

void split_segment(const std::u32string& text, std::size_t begin, std::size_t end,
                   const SplitterConfig& cfg, std::vector<SentenceSpan>& out) {
  auto emit = [&](std::size_t s, std::size_t e) {
    while (s < e && utf8::is_space(text[s])) ++s;
    while (e > s && utf8::is_space(text[e - 1])) --e;
    if (s < e) out.push_back({s, e});
  };

  std::size_t sentence_start = begin;
  for (std::size_t i = begin; i < end; ++i) {
    if (!is_terminator(text[i])) continue;
    std::size_t j = i + 1;
    if (j >= end || !utf8::is_space(text[j])) continue;
    while (j < end && utf8::is_space(text[j])) ++j;
    if (j >= end || !utf8::is_upper_or_digit(text[j])) continue;

    std::size_t word_start = i;
    while (word_start > sentence_start && utf8::is_alnum(text[word_start - 1])) --word_start;
    std::size_t token_start = i;
    while (token_start > sentence_start && !utf8::is_space(text[token_start - 1])) --token_start;
    const std::string word = utf8::encode(text.substr(word_start, i - word_start));
    const std::string token = utf8::encode(text.substr(token_start, i - token_start));
    if (listed(cfg.non_terminal_tokens, word) || listed(cfg.abbreviations, word) ||
        listed(cfg.non_terminal_tokens, token) || listed(cfg.abbreviations, token)) {
      continue;
    }
    emit(sentence_start, i + 1);
    sentence_start = i + 1;
  }
  emit(sentence_start, end);
}

std::size_t sentence_of(std::span<const SentenceSpan> sentences, const EntityMention& e) {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].contains(e.start, e.end)) return i;
  }
  return sentences.size();
}

}  // namespace

std::string FlatText::utf8() const { return utf8::encode(text); }

FlatText merge_title_abstract(const Document& doc) {
  FlatText flat;
  flat.pmid = doc.pmid;
  flat.text = utf8::decode(doc.title);
  flat.title_length = flat.text.size();
  flat.text.push_back(U' ');
  flat.text += utf8::decode(doc.abstract);
  return flat;
}

void SplitterConfig::validate() const {
  auto check = [](const std::vector<std::string>& list, const char* what) {
    for (const auto& token : list) {
      const bool has_space = std::any_of(token.begin(), token.end(), [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r';
      });
      if (token.empty() || has_space) {
        throw PreprocessError(PreprocessErrc::InvalidConfig,
                              std::string(what) + " entries must be non-empty and contain no "
                                                  "whitespace: '" + token + "'");
      }
    }
  };
  check(non_terminal_tokens, "non_terminal_tokens");
  check(abbreviations, "abbreviations");
}

std::vector<SentenceSpan> split_sentences(const FlatText& flat, const SplitterConfig& cfg) {
  cfg.validate();
  std::vector<SentenceSpan> spans;
  const std::size_t title_end = std::min(flat.title_length, flat.text.size());
  split_segment(flat.text, 0, title_end, cfg, spans);
  if (title_end + 1 < flat.text.size()) {
    split_segment(flat.text, title_end + 1, flat.text.size(), cfg, spans);
  }
  return spans;
}

std::vector<CandidatePair> generate_candidates(const FlatText& flat,
                                               std::span<const EntityMention> entities,
                                               std::span<const SentenceSpan> sentences,
                                               Diagnostics* diag) {
  std::vector<CandidatePair> pairs;
  for (const auto& sentence : sentences) {
    std::vector<const EntityMention*> chems;
    std::vector<const EntityMention*> prots;
    for (const auto& e : entities) {
      if (!sentence.contains(e.start, e.end)) continue;
      (e.kind == EntityKind::Chemical ? chems : prots).push_back(&e);
    }
    for (const auto* c : chems) {
      for (const auto* p : prots) {
        if (c->overlaps(*p)) {
          warn(diag, "pmid " + flat.pmid + ": chemical " + c->eid + " overlaps protein " + p->eid +
                         ", pair skipped");
          count(diag, "overlapping pairs skipped");
          continue;
        }
        pairs.push_back({flat.pmid, sentence, *c, *p});
      }
    }
  }
  auto key = [](const CandidatePair& cp) {
    return std::tie(cp.sentence.start, cp.chem.start, cp.chem.end, cp.chem.eid, cp.prot.start,
                    cp.prot.end, cp.prot.eid);
  };
  std::stable_sort(pairs.begin(), pairs.end(),
                   [&](const CandidatePair& a, const CandidatePair& b) { return key(a) < key(b); });
  return pairs;
}

TaggedText tag_entities(const FlatText& flat, const SentenceSpan& sentence,
                        const EntityMention& chem, const EntityMention& prot, Diagnostics* diag) {
  if (chem.overlaps(prot)) {
    throw PreprocessError(PreprocessErrc::Overlap, "pmid " + flat.pmid + ": entities " + chem.eid +
                                                       " and " + prot.eid + " overlap");
  }
  if (!sentence.contains(chem.start, chem.end) || !sentence.contains(prot.start, prot.end) ||
      sentence.end > flat.text.size()) {
    throw PreprocessError(PreprocessErrc::SpanOutsideSentence,
                          "pmid " + flat.pmid + ": entity outside sentence span");
  }
  TaggedText tagged;
  tagged.text = flat.text.substr(sentence.start, sentence.size());
  const std::size_t cs = chem.start - sentence.start;
  const std::size_t ce = chem.end - sentence.start;
  const std::size_t ps = prot.start - sentence.start;
  const std::size_t pe = prot.end - sentence.start;

  if (tagged.text.find_first_of(U"$#") != std::u32string::npos) {
    warn(diag, "pmid " + flat.pmid + ": sentence already contains a '$' or '#' character");
    count(diag, "marker collisions");
  }

  // Right-to-left so the earlier offsets stay valid.
  if (cs < ps) {
    tagged.text.insert(pe, 1, U'#');
    tagged.text.insert(ps, 1, U'#');
    tagged.text.insert(ce, 1, U'$');
    tagged.text.insert(cs, 1, U'$');
    tagged.chem = {cs, ce + 2};
    tagged.prot = {ps + 2, pe + 4};
  } else {
    tagged.text.insert(ce, 1, U'$');
    tagged.text.insert(cs, 1, U'$');
    tagged.text.insert(pe, 1, U'#');
    tagged.text.insert(ps, 1, U'#');
    tagged.prot = {ps, pe + 2};
    tagged.chem = {cs + 2, ce + 4};
  }
  return tagged;
}

std::vector<RelationExample> label_candidates(const FlatText& flat,
                                              std::span<const CandidatePair> pairs,
                                              std::span<const RelationAnnotation> gold,
                                              Diagnostics* diag) {
  std::map<std::pair<std::string, std::string>, std::set<RelationLabel>> gold_labels;
  for (const auto& r : gold) {
    if (r.pmid != flat.pmid) continue;
    gold_labels[{r.arg1, r.arg2}].insert(r.label);
  }

  std::vector<RelationExample> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    RelationLabel label = RelationLabel::Other;
    auto it = gold_labels.find({pair.chem.eid, pair.prot.eid});
    if (it != gold_labels.end()) {
      std::vector<RelationLabel> kept;
      for (RelationLabel l : it->second) {
        if (!is_deleted_label(l)) kept.push_back(l);
      }
      if (kept.empty()) {
        count(diag, "rare-label pairs dropped");
        continue;
      }
      if (kept.size() > 1) {
        std::string names;
        for (RelationLabel l : kept) names += " " + std::string(label_name(l));
        warn(diag, "pmid " + flat.pmid + ": pair " + pair.chem.eid + "/" + pair.prot.eid +
                       " has several labels:" + names + "; keeping " +
                       std::string(label_name(kept.front())));
        count(diag, "multi-label pairs");
      }
      label = kept.front();  // std::set iterates in RelationLabel order
    }
    const TaggedText tagged = tag_entities(flat, pair.sentence, pair.chem, pair.prot, diag);
    out.push_back({flat.pmid, pair.chem.eid, pair.prot.eid, utf8::encode(tagged.text), label,
                   tagged.chem, tagged.prot});
  }
  return out;
}

PreprocessResult preprocess_corpus(const Corpus& corpus, const SplitterConfig& cfg,
                                   Diagnostics* diag) {
  cfg.validate();
  PreprocessResult result;
  auto& stats = result.stats;
  for (RelationLabel l : kCorpusLabels) {
    if (!is_deleted_label(l)) stats.per_label[l] = 0;
  }
  stats.per_label[RelationLabel::Other] = 0;

  for (const auto& doc : corpus.documents()) {
    const FlatText flat = merge_title_abstract(doc);
    const auto sentences = split_sentences(flat, cfg);
    const auto& entities = corpus.entities(doc.pmid);
    const auto& gold = corpus.relations(doc.pmid);

    Diagnostics local;
    const auto pairs = generate_candidates(flat, entities, sentences, &local);
    auto examples = label_candidates(flat, pairs, gold, &local);

    for (const auto& r : gold) {
      const auto* chem = corpus.entity(doc.pmid, r.arg1);
      const auto* prot = corpus.entity(doc.pmid, r.arg2);
      const std::size_t sc = sentence_of(sentences, *chem);
      const std::size_t sp = sentence_of(sentences, *prot);
      if (sc != sp || sc == sentences.size()) {
        ++stats.cross_sentence_skipped;
        warn(&local, "pmid " + doc.pmid + ": cross-sentence relation " +
                         std::string(label_name(r.label)) + " " + r.arg1 + "/" + r.arg2 +
                         " skipped");
      }
    }

    stats.documents += 1;
    stats.sentences += sentences.size();
    stats.candidates += pairs.size();
    stats.examples += examples.size();
    stats.rare_label_dropped += local.counter("rare-label pairs dropped");
    stats.overlapping_skipped += local.counter("overlapping pairs skipped");
    stats.multi_label_pairs += local.counter("multi-label pairs");
    for (const auto& ex : examples) stats.per_label[ex.label] += 1;

    if (diag != nullptr) {
      for (auto& w : local.warnings) diag->warn(std::move(w));
      for (const auto& [key, n] : local.counters) diag->count(key, n);
    }
    std::move(examples.begin(), examples.end(), std::back_inserter(result.examples));
  }
  count(diag, "cross-sentence relations skipped", stats.cross_sentence_skipped);
  return result;
}

void write_examples(std::ostream& out, std::span<const RelationExample> examples) {
  for (const auto& ex : examples) {
    std::string text = ex.tagged_text;
    std::replace_if(text.begin(), text.end(),
                    [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    out << ex.pmid << '\t' << ex.chem_eid << '\t' << ex.prot_eid << '\t' << label_name(ex.label)
        << '\t' << text << '\n';
  }
}

std::vector<RelationExample> read_examples(std::istream& in, Diagnostics* diag) {
  std::vector<RelationExample> out;
  const auto lines = read_lines(in);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    for (int f = 0; f < 4; ++f) {
      const std::size_t tab = line.find('\t', pos);
      if (tab == std::string::npos) break;
      fields.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    if (fields.size() != 4) {
      throw PreprocessError(PreprocessErrc::MalformedExample,
                            "examples line " + std::to_string(i + 1) + ": expected 5 fields");
    }
    fields.push_back(line.substr(pos));
    const auto label = parse_label(fields[3], /*allow_other=*/true);
    if (!label || is_deleted_label(*label)) {
      throw PreprocessError(PreprocessErrc::MalformedExample,
                            "examples line " + std::to_string(i + 1) + ": bad label '" +
                                fields[3] + "'");
    }
    const std::u32string text = utf8::decode(fields[4]);
    std::vector<std::size_t> dollars;
    std::vector<std::size_t> hashes;
    for (std::size_t k = 0; k < text.size(); ++k) {
      if (text[k] == U'$') dollars.push_back(k);
      if (text[k] == U'#') hashes.push_back(k);
    }
    const bool ok = dollars.size() == 2 && hashes.size() == 2 &&
                    (dollars[1] < hashes[0] || hashes[1] < dollars[0]);
    if (!ok) {
      warn(diag, "examples line " + std::to_string(i + 1) + ": entity markers are ambiguous");
      count(diag, "ambiguous marker lines skipped");
      continue;
    }
    out.push_back({fields[0], fields[1], fields[2], fields[4], *label,
                   CharSpan{dollars[0], dollars[1] + 1}, CharSpan{hashes[0], hashes[1] + 1}});
  }
  return out;
}

}  // namespace dtirex
