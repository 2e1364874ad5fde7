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

#include "dtirex/tokenizer.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include "dtirex/utf8.hpp"

namespace dtirex {

namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved = {"<pad>", "<s>", "</s>", "<unk>", "$", "#"};
  return kReserved;
}

}  // namespace

std::vector<Token> tokenize_with_offsets(std::u32string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (utf8::is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (utf8::is_alnum(text[i])) {
      while (j < text.size() && utf8::is_alnum(text[j])) ++j;
    }
    tokens.push_back({utf8::encode(text.substr(i, j - i)), i, j});
    i = j;
  }
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(utf8::decode(text))) out.push_back(std::move(t.text));
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(reserved_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto& reserved = reserved_tokens();
  if (tokens_.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), tokens_.begin())) {
    throw TokenizerError(TokenizerErrc::BadVocabFile,
                         "vocabulary must start with <pad> <s> </s> <unk> $ #");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
      throw TokenizerError(TokenizerErrc::BadVocabFile,
                           "vocabulary entry " + std::to_string(i) + " is empty or has whitespace");
    }
    if (!ids_.emplace(t, static_cast<std::int32_t>(i)).second) {
      throw TokenizerError(TokenizerErrc::BadVocabFile, "duplicate vocabulary entry '" + t + "'");
    }
  }
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

const std::string& Vocabulary::token(std::int32_t id) const {
  return tokens_.at(static_cast<std::size_t>(id));
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  auto lines = read_lines(in);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return Vocabulary(std::move(lines));
}

Vocabulary build_vocab(std::span<const RelationExample> examples, std::size_t min_frequency) {
  if (min_frequency < 1) {
    throw TokenizerError(TokenizerErrc::InvalidArgument, "min_frequency must be >= 1");
  }
  if (examples.empty()) {
    throw TokenizerError(TokenizerErrc::EmptyCorpus, "cannot build a vocabulary from no examples");
  }
  const auto& reserved = reserved_tokens();
  std::map<std::string, std::size_t> freq;
  for (const auto& ex : examples) {
    for (auto& t : tokenize(ex.tagged_text)) ++freq[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, n] : freq) {
    if (n < min_frequency) continue;
    if (std::find(reserved.begin(), reserved.end(), token) != reserved.end()) continue;
    ranked.emplace_back(token, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = reserved;
  for (auto& [token, n] : ranked) tokens.push_back(std::move(token));
  return Vocabulary(std::move(tokens));
}

std::optional<EncodedExample> encode(const RelationExample& example, const Vocabulary& vocab,
                                     std::size_t max_len, Diagnostics* diag) {
  if (max_len < 8) throw TokenizerError(TokenizerErrc::InvalidArgument, "max_len must be >= 8");
  if (is_deleted_label(example.label)) {
    throw TokenizerError(TokenizerErrc::UnknownLabel,
                         "label " + std::string(label_name(example.label)) + " is not trainable");
  }
  const std::u32string text = utf8::decode(example.tagged_text);
  const auto tokens = tokenize_with_offsets(text);

  // Token spans are shifted by one for the leading <s>.
  auto to_token_span = [&](const CharSpan& chars) {
    TokenSpan span{0, 0};
    bool found = false;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      if (tokens[k].start >= chars.start && tokens[k].end <= chars.end) {
        if (!found) span.begin = k + 1;
        span.end = k + 2;
        found = true;
      }
    }
    if (!found) {
      throw TokenizerError(TokenizerErrc::InvalidArgument,
                           "entity span covers no token in example " + example.pmid + " " +
                               example.chem_eid + "/" + example.prot_eid);
    }
    return span;
  };

  EncodedExample enc;
  enc.chem = to_token_span(example.chem_span);
  enc.prot = to_token_span(example.prot_span);
  enc.label = class_id(example.label);
  enc.pmid = example.pmid;
  enc.chem_eid = example.chem_eid;
  enc.prot_eid = example.prot_eid;

  // Room for <s> and </s>.
  const std::size_t keep = std::min(tokens.size(), max_len - 2);
  if (enc.chem.end > keep + 1 || enc.prot.end > keep + 1) {
    count(diag, "truncated examples skipped");
    return std::nullopt;
  }
  enc.ids.reserve(keep + 2);
  enc.ids.push_back(Vocabulary::kBos);
  for (std::size_t k = 0; k < keep; ++k) enc.ids.push_back(vocab.id(tokens[k].text));
  enc.ids.push_back(Vocabulary::kEos);
  return enc;
}

std::vector<std::string> decode(std::span<const std::int32_t> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (std::int32_t id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace dtirex
