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

// Small synthetic inputs shared by the model, training and acceptance tests.

#include <cstdint>
#include <string>
#include <vector>

#include "dtirex/model.hpp"
#include "dtirex/tokenizer.hpp"

namespace dtirex::testing {

inline ModelConfig small_config(HeadKind head = HeadKind::RbertCnn, bool cls_path = true) {
  ModelConfig cfg;
  cfg.vocab_size = 30;
  cfg.hidden = 16;
  cfg.layers = 4;
  cfg.heads = 2;
  cfg.ffn = 32;
  cfg.max_positions = 32;
  cfg.head_dim = 8;
  cfg.dropout = 0.0;
  cfg.head = head;
  cfg.include_cls_path = cls_path;
  return cfg;
}

// <s> w w $ w $ w # w w # </s> style sequence of length T with random words.
inline EncodedExample random_example(std::size_t vocab_size, std::size_t T, std::uint64_t seed,
                                     int label) {
  Rng rng(seed);
  EncodedExample ex;
  ex.ids.resize(T);
  for (auto& id : ex.ids) {
    id = Vocabulary::kNumReserved + static_cast<std::int32_t>(rng.below(vocab_size - Vocabulary::kNumReserved));
  }
  ex.ids.front() = Vocabulary::kBos;
  ex.ids.back() = Vocabulary::kEos;
  const std::size_t c0 = 1 + rng.below(T / 2 - 3);
  ex.chem = {c0, c0 + 3};
  ex.ids[c0] = ex.ids[c0 + 2] = Vocabulary::kChemMarker;
  const std::size_t p0 = T / 2 + rng.below(T / 2 - 4);
  ex.prot = {p0, p0 + 3};
  ex.ids[p0] = ex.ids[p0 + 2] = Vocabulary::kProtMarker;
  ex.label = label;
  ex.pmid = "s" + std::to_string(seed);
  ex.chem_eid = "T1";
  ex.prot_eid = "T2";
  return ex;
}

// Vocabulary of `size` entries: the reserved block followed by w0, w1, ...
inline Vocabulary word_vocab(std::size_t size) {
  std::vector<std::string> tokens = Vocabulary().tokens();
  for (std::size_t i = tokens.size(); i < size; ++i) {
    tokens.push_back("w" + std::to_string(i - Vocabulary::kNumReserved));
  }
  return Vocabulary(std::move(tokens));
}

// Labelled set over an 11-class, 50-token vocabulary. Class c puts word c
// inside the chemical span and word 11 + c inside the protein span; the rest
// of the sequence is filler from the remaining 22 words. Labels cycle 0..10.
inline std::vector<EncodedExample> separable_examples(std::size_t n, std::size_t T,
                                                      std::uint64_t seed) {
  constexpr std::int32_t kClasses = 11;
  constexpr std::int32_t kFirstWord = Vocabulary::kNumReserved;
  constexpr std::int32_t kFirstFiller = kFirstWord + 2 * kClasses;
  constexpr std::uint64_t kFillers = 50 - kFirstFiller;
  Rng rng(seed);
  std::vector<EncodedExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::int32_t>(i % kClasses);
    EncodedExample ex;
    ex.ids.resize(T);
    for (auto& id : ex.ids) id = kFirstFiller + static_cast<std::int32_t>(rng.below(kFillers));
    ex.ids.front() = Vocabulary::kBos;
    ex.ids.back() = Vocabulary::kEos;
    const std::size_t c0 = 1 + rng.below(T / 2 - 3);
    ex.ids[c0] = ex.ids[c0 + 2] = Vocabulary::kChemMarker;
    ex.ids[c0 + 1] = kFirstWord + c;
    ex.chem = {c0, c0 + 3};
    const std::size_t p0 = T / 2 + rng.below(T / 2 - 4);
    ex.ids[p0] = ex.ids[p0 + 2] = Vocabulary::kProtMarker;
    ex.ids[p0 + 1] = kFirstWord + kClasses + c;
    ex.prot = {p0, p0 + 3};
    ex.label = c;
    ex.pmid = "p" + std::to_string(i);
    ex.chem_eid = "T1";
    ex.prot_eid = "T2";
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace dtirex::testing
