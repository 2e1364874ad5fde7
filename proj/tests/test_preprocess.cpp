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

#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "dtirex/preprocess.hpp"
#include "dtirex/utf8.hpp"

using namespace dtirex;

namespace {

const std::string kFixture = DTIREX_FIXTURE_DIR;

Corpus fixture() {
  return load_corpus(
      {kFixture + "/abstracts.tsv", kFixture + "/entities.tsv", kFixture + "/relations.tsv"});
}

FlatText flat_of(const std::string& title, const std::string& abstract) {
  return merge_title_abstract({"1", title, abstract});
}

std::vector<std::string> sentence_texts(const FlatText& flat, const SplitterConfig& cfg = {}) {
  std::vector<std::string> out;
  for (const auto& s : split_sentences(flat, cfg)) {
    out.push_back(utf8::encode(std::u32string_view(flat.text).substr(s.start, s.size())));
  }
  return out;
}

EntityMention mention(const FlatText& flat, std::string eid, EntityKind kind,
                      const std::string& surface, std::size_t from = 0) {
  const std::u32string s = utf8::decode(surface);
  const std::size_t start = flat.text.find(s, from);
  REQUIRE(start != std::u32string::npos);
  return {flat.pmid, std::move(eid), kind,
          kind == EntityKind::Chemical ? "CHEMICAL" : "GENE-Y",
          start, start + s.size(), surface};
}

std::string strip_markers(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '$' || c == '#'; }), s.end());
  return s;
}

}  // namespace

TEST_CASE("flat text is title, one space, abstract") {
  CHECK(flat_of("A", "B").utf8() == "A B");
  CHECK(flat_of("A", "").utf8() == "A ");
  const FlatText f = flat_of("β title", "body");
  CHECK(f.title_length == 7);
  CHECK(f.text.size() == 7 + 1 + 4);
  CHECK(f.text[7] == U' ');
}

TEST_CASE("canonical split rule") {
  CHECK(sentence_texts(flat_of("T.", "Aspirin works. It inhibits COX.")) ==
        std::vector<std::string>{"T.", "Aspirin works.", "It inhibits COX."});
  CHECK(sentence_texts(flat_of("T", "Dose was 5 mg. 12 rats died! Why? Unknown.")) ==
        std::vector<std::string>{"T", "Dose was 5 mg.", "12 rats died!", "Why?", "Unknown."});
  CHECK(sentence_texts(flat_of("T", "Levels of e.g. glucose rose. no split here.")) ==
        std::vector<std::string>{"T", "Levels of e.g. glucose rose. no split here."});
}

TEST_CASE("splits after vivo and Vmax are suppressed") {
  CHECK(sentence_texts(flat_of("T", "Effects in vivo. Studies show more.")) ==
        std::vector<std::string>{"T", "Effects in vivo. Studies show more."});
  CHECK(sentence_texts(flat_of("T", "We measured Vmax. Km was low.")) ==
        std::vector<std::string>{"T", "We measured Vmax. Km was low."});
  SplitterConfig none;
  none.non_terminal_tokens.clear();
  CHECK(sentence_texts(flat_of("T", "Effects in vivo. Studies show more."), none).size() == 3);
}

TEST_CASE("abbreviation list suppresses splits by word or by token") {
  SplitterConfig cfg;
  cfg.abbreviations = {"Fig", "i.e"};
  CHECK(sentence_texts(flat_of("T", "See Fig. 3 for data. Done."), cfg) ==
        std::vector<std::string>{"T", "See Fig. 3 for data.", "Done."});
  CHECK(sentence_texts(flat_of("T", "One drug, i.e. X is used."), cfg).size() == 2);
}

TEST_CASE("title is its own sentence even without a terminator") {
  CHECK(sentence_texts(flat_of("Title only", "")) == std::vector<std::string>{"Title only"});
  CHECK(sentence_texts(flat_of("no period", "lower case start.")) ==
        std::vector<std::string>{"no period", "lower case start."});
}

TEST_CASE("sentence spans partition the non-whitespace text") {
  const Corpus c = fixture();
  for (const auto& doc : c.documents()) {
    const FlatText flat = merge_title_abstract(doc);
    const auto spans = split_sentences(flat, {});
    std::size_t covered = 0;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (i > 0) CHECK(spans[i - 1].end <= spans[i].start);
      CHECK(spans[i].start < spans[i].end);
      CHECK_FALSE(utf8::is_space(flat.text[spans[i].start]));
      CHECK_FALSE(utf8::is_space(flat.text[spans[i].end - 1]));
      for (std::size_t k = spans[i].start; k < spans[i].end; ++k) {
        if (!utf8::is_space(flat.text[k])) ++covered;
      }
    }
    const auto non_space = std::count_if(flat.text.begin(), flat.text.end(),
                                         [](char32_t ch) { return !utf8::is_space(ch); });
    CHECK(covered == static_cast<std::size_t>(non_space));
  }
}

TEST_CASE("splitter config validation") {
  SplitterConfig cfg;
  cfg.abbreviations = {""};
  CHECK_THROWS_AS(cfg.validate(), PreprocessError);
  cfg.abbreviations = {"a b"};
  CHECK_THROWS_AS(cfg.validate(), PreprocessError);
}

TEST_CASE("candidates are the chemical x protein product within a sentence") {
  const FlatText flat = flat_of("T", "DF binds sigma and NMDA. PCP binds nothing. Here is KIT.");
  const std::vector<EntityMention> ents = {
      mention(flat, "T1", EntityKind::Chemical, "DF"),
      mention(flat, "T2", EntityKind::Protein, "sigma"),
      mention(flat, "T3", EntityKind::Protein, "NMDA"),
      mention(flat, "T4", EntityKind::Chemical, "PCP"),
      mention(flat, "T5", EntityKind::Protein, "KIT"),
  };
  const auto pairs = generate_candidates(flat, ents, split_sentences(flat, {}));
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].chem.eid == "T1");
  CHECK(pairs[0].prot.eid == "T2");
  CHECK(pairs[1].prot.eid == "T3");
}

TEST_CASE("overlapping mentions are skipped and counted") {
  const FlatText flat = flat_of("T", "The DOPA decarboxylase gene.");
  const std::vector<EntityMention> ents = {
      mention(flat, "T1", EntityKind::Chemical, "DOPA"),
      mention(flat, "T2", EntityKind::Protein, "DOPA decarboxylase"),
  };
  Diagnostics diag;
  CHECK(generate_candidates(flat, ents, split_sentences(flat, {}), &diag).empty());
  CHECK(diag.counter("overlapping pairs skipped") == 1);
  CHECK_THROWS_AS(tag_entities(flat, split_sentences(flat, {})[1], ents[0], ents[1]),
                  PreprocessError);
}

TEST_CASE("tagging wraps surfaces and reports marker-inclusive spans") {
  const FlatText flat = flat_of("T", "DF binds the sigma receptors.");
  const auto sentence = split_sentences(flat, {})[1];
  const auto chem = mention(flat, "T1", EntityKind::Chemical, "DF");
  const auto prot = mention(flat, "T2", EntityKind::Protein, "sigma receptors");
  const TaggedText t = tag_entities(flat, sentence, chem, prot);
  CHECK(utf8::encode(t.text) == "$DF$ binds the #sigma receptors#.");
  CHECK(t.chem.start == 0);
  CHECK(t.chem.end == 4);
  CHECK(utf8::encode(t.text.substr(t.prot.start, t.prot.size())) == "#sigma receptors#");
}

TEST_CASE("protein before chemical keeps both spans right") {
  const FlatText flat = flat_of("T", "KIT is blocked by imatinib.");
  const auto sentence = split_sentences(flat, {})[1];
  const TaggedText t = tag_entities(flat, sentence, mention(flat, "T1", EntityKind::Chemical, "imatinib"),
                                    mention(flat, "T2", EntityKind::Protein, "KIT"));
  CHECK(utf8::encode(t.text) == "#KIT# is blocked by $imatinib$.");
  CHECK(utf8::encode(t.text.substr(t.chem.start, t.chem.size())) == "$imatinib$");
  CHECK(utf8::encode(t.text.substr(t.prot.start, t.prot.size())) == "#KIT#");
}

TEST_CASE("marker characters already in a sentence are logged") {
  const FlatText flat = flat_of("T", "DF costs $5 at KIT.");
  Diagnostics diag;
  tag_entities(flat, split_sentences(flat, {})[1], mention(flat, "T1", EntityKind::Chemical, "DF"),
               mention(flat, "T2", EntityKind::Protein, "KIT"), &diag);
  CHECK(diag.counter("marker collisions") == 1);
}

TEST_CASE("labeling: gold, Other, deleted, multi-label") {
  const FlatText flat = flat_of("T", "A B C D E.");
  const std::vector<EntityMention> ents = {
      mention(flat, "T1", EntityKind::Chemical, "A"), mention(flat, "T2", EntityKind::Protein, "B"),
      mention(flat, "T3", EntityKind::Protein, "C"),  mention(flat, "T4", EntityKind::Protein, "D"),
      mention(flat, "T5", EntityKind::Protein, "E"),
  };
  const std::vector<RelationAnnotation> gold = {
      {"1", RelationLabel::Inhibitor, "T1", "T2"},
      {"1", RelationLabel::AgonistInhibitor, "T1", "T3"},
      {"1", RelationLabel::Inhibitor, "T1", "T5"},
      {"1", RelationLabel::Antagonist, "T1", "T5"},
      {"1", RelationLabel::AgonistActivator, "T1", "T5"},
  };
  Diagnostics diag;
  const auto pairs = generate_candidates(flat, ents, split_sentences(flat, {}));
  const auto ex = label_candidates(flat, pairs, gold, &diag);
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].prot_eid == "T2");
  CHECK(ex[0].label == RelationLabel::Inhibitor);
  CHECK(ex[1].prot_eid == "T4");
  CHECK(ex[1].label == RelationLabel::Other);
  CHECK(ex[2].prot_eid == "T5");
  CHECK(ex[2].label == RelationLabel::Antagonist);
  CHECK(diag.counter("rare-label pairs dropped") == 1);
  CHECK(diag.counter("multi-label pairs") == 1);
}

TEST_CASE("fixture preprocessing matches hand counts") {
  Diagnostics diag;
  const PreprocessResult r = preprocess_corpus(fixture(), {}, &diag);
  const auto& s = r.stats;
  CHECK(s.documents == 5);
  CHECK(s.sentences == 17);
  CHECK(s.candidates == 14);
  CHECK(s.examples == 12);
  CHECK(r.examples.size() == 12);
  CHECK(s.cross_sentence_skipped == 1);
  CHECK(s.rare_label_dropped == 2);
  CHECK(s.multi_label_pairs == 1);
  CHECK(s.overlapping_skipped == 0);
  CHECK(s.per_label.at(RelationLabel::Other) == 4);
  CHECK(s.per_label.at(RelationLabel::Inhibitor) == 4);
  CHECK(s.per_label.at(RelationLabel::Antagonist) == 2);
  CHECK(s.per_label.at(RelationLabel::Activator) == 1);
  CHECK(s.per_label.at(RelationLabel::DirectRegulator) == 1);
  for (const auto& ex : r.examples) CHECK_FALSE(is_deleted_label(ex.label));
}

TEST_CASE("fixture examples tag the DF sentence and keep the vivo sentence whole") {
  const PreprocessResult r = preprocess_corpus(fixture(), {});
  const auto find = [&](const std::string& pmid, const std::string& chem, const std::string& prot) {
    for (const auto& ex : r.examples) {
      if (ex.pmid == pmid && ex.chem_eid == chem && ex.prot_eid == prot) return &ex;
    }
    return static_cast<const RelationExample*>(nullptr);
  };
  const auto* df = find("10047461", "T3", "T4");
  REQUIRE(df != nullptr);
  CHECK(df->tagged_text.find("binding of $DF$ to the #sigma receptors# and NMDA") !=
        std::string::npos);
  CHECK(df->label == RelationLabel::DirectRegulator);

  const auto* vivo = find("20000002", "T3", "T4");
  REQUIRE(vivo != nullptr);
  CHECK(vivo->tagged_text ==
        "$Propranolol$ was given to rats in vivo. It antagonized the #β2-adrenergic receptor# in "
        "the heart.");
  CHECK(vivo->label == RelationLabel::Antagonist);

  CHECK(find("20000003", "T2", "T3") == nullptr);
  CHECK(find("20000003", "T4", "T5") == nullptr);
  const auto* other = find("20000003", "T6", "T5");
  REQUIRE(other != nullptr);
  CHECK(other->label == RelationLabel::Other);
}

TEST_CASE("stripping markers recovers the sentence at the recorded spans") {
  const Corpus c = fixture();
  const PreprocessResult r = preprocess_corpus(c, {});
  for (const auto& ex : r.examples) {
    const std::u32string t = utf8::decode(ex.tagged_text);
    CHECK(t[ex.chem_span.start] == U'$');
    CHECK(t[ex.chem_span.end - 1] == U'$');
    CHECK(t[ex.prot_span.start] == U'#');
    CHECK(t[ex.prot_span.end - 1] == U'#');
    const auto* chem = c.entity(ex.pmid, ex.chem_eid);
    const auto inner = utf8::encode(t.substr(ex.chem_span.start + 1, ex.chem_span.size() - 2));
    CHECK(inner == chem->surface);
    const std::string stripped = strip_markers(ex.tagged_text);
    const FlatText flat = merge_title_abstract(*c.find(ex.pmid));
    CHECK(flat.utf8().find(stripped) != std::string::npos);
  }
}

TEST_CASE("examples TSV round-trips and is deterministic") {
  const PreprocessResult a = preprocess_corpus(fixture(), {});
  const PreprocessResult b = preprocess_corpus(fixture(), {});
  std::ostringstream oa, ob;
  write_examples(oa, a.examples);
  write_examples(ob, b.examples);
  CHECK(oa.str() == ob.str());

  std::istringstream in(oa.str());
  const auto back = read_examples(in);
  REQUIRE(back.size() == a.examples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].pmid == a.examples[i].pmid);
    CHECK(back[i].label == a.examples[i].label);
    CHECK(back[i].tagged_text == a.examples[i].tagged_text);
    CHECK(back[i].chem_span == a.examples[i].chem_span);
    CHECK(back[i].prot_span == a.examples[i].prot_span);
  }
}

TEST_CASE("ambiguous marker lines are skipped when reading examples") {
  std::istringstream in("1\tT1\tT2\tOther\t$A$ costs $5 at #B#\n1\tT1\tT2\tINHIBITOR\t$A$ and #B#\n");
  Diagnostics diag;
  const auto ex = read_examples(in, &diag);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].label == RelationLabel::Inhibitor);
  CHECK(diag.counter("ambiguous marker lines skipped") == 1);
}
