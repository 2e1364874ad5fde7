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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dtirex/common.hpp"
#include "dtirex/preprocess.hpp"

namespace dtirex {

enum class TokenizerErrc { EmptyCorpus, InvalidArgument, BadVocabFile, UnknownLabel };
using TokenizerError = CodedError<TokenizerErrc>;

struct Token {
  std::string text;
  std::size_t start = 0;  // scalar offsets into the source text
  std::size_t end = 0;
};

// Maximal alphanumeric runs are tokens; any other non-space character is a
// token of its own; whitespace only separates.
std::vector<std::string> tokenize(std::string_view text);
std::vector<Token> tokenize_with_offsets(std::u32string_view text);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kBos = 1;  // <s>
  static constexpr std::int32_t kEos = 2;  // </s>
  static constexpr std::int32_t kUnk = 3;
  static constexpr std::int32_t kChemMarker = 4;  // '$'
  static constexpr std::int32_t kProtMarker = 5;  // '#'
  static constexpr std::int32_t kNumReserved = 6;

  // Reserved entries only.
  Vocabulary();
  // First six entries must be the reserved tokens, in order.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line; line number - 1 is the id.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

// Ids after the reserved block follow descending frequency, then byte order.
Vocabulary build_vocab(std::span<const RelationExample> examples, std::size_t min_frequency);

// Half-open token index range into EncodedExample::ids.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  auto operator<=>(const TokenSpan&) const = default;
};

struct EncodedExample {
  std::vector<std::int32_t> ids;
  TokenSpan chem;  // includes marker tokens
  TokenSpan prot;
  int label = 0;   // class id, see class_id()
  std::string pmid;
  std::string chem_eid;
  std::string prot_eid;
};

// Wraps the tokens in <s> ... </s>. Sequences longer than max_len are cut on
// the right; if the cut touches either entity span the example is skipped
// (std::nullopt) and counted under "truncated examples skipped".
std::optional<EncodedExample> encode(const RelationExample& example, const Vocabulary& vocab,
                                     std::size_t max_len, Diagnostics* diag = nullptr);

std::vector<std::string> decode(std::span<const std::int32_t> ids, const Vocabulary& vocab);

}  // namespace dtirex
