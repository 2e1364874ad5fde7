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

#include "doctest.h"
#include "dtirex/common.hpp"
#include "dtirex/utf8.hpp"

using namespace dtirex;

TEST_CASE("decode counts scalars, not bytes") {
  const std::string s = "β2 µM 漢字 😀";
  const std::u32string d = utf8::decode(s);
  CHECK(d.size() == 10);
  CHECK(d[0] == U'β');
  CHECK(d[9] == U'😀');
  CHECK(utf8::length(s) == 10);
  CHECK(utf8::encode(d) == s);
}

TEST_CASE("malformed input is rejected") {
  for (const std::string bad : {std::string("\xC3"), std::string("\xE2\x82"), std::string("\x80"),
                                std::string("\xC0\xAF"), std::string("\xED\xA0\x80"),
                                std::string("\xF4\x90\x80\x80"), std::string("a\xC3(")}) {
    CAPTURE(bad.size());
    CHECK_THROWS_AS(utf8::decode(bad), Error);
  }
}

TEST_CASE("character classes") {
  CHECK(utf8::is_space(U' '));
  CHECK(utf8::is_space(U'\t'));
  CHECK(utf8::is_space(U'\u00A0'));
  CHECK_FALSE(utf8::is_space(U'a'));
  CHECK(utf8::is_alnum(U'β'));
  CHECK(utf8::is_alnum(U'é'));
  CHECK_FALSE(utf8::is_alnum(U'×'));
  CHECK_FALSE(utf8::is_alnum(U'.'));
  CHECK(utf8::is_upper_or_digit(U'7'));
  CHECK(utf8::is_upper_or_digit(U'Δ'));
  CHECK(utf8::is_upper_or_digit(U'É'));
  CHECK_FALSE(utf8::is_upper_or_digit(U'β'));
  CHECK_FALSE(utf8::is_upper_or_digit(U'a'));
}
