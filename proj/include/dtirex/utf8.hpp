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

#include <string>
#include <string_view>

namespace dtirex::utf8 {

// Decodes UTF-8 into Unicode scalar values. Throws dtirex::Error on
// malformed input (overlong forms, surrogates, truncated sequences).
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view chars);

// Number of scalar values in a UTF-8 string.
std::size_t length(std::string_view bytes);

bool is_space(char32_t c);
// ASCII letters and digits, plus letters from the Latin-1 supplement,
// Latin Extended-A/B, Greek and Cyrillic blocks. Biomedical names such as
// "TNF-α" keep the Greek letter inside the word.
bool is_alnum(char32_t c);
bool is_upper_or_digit(char32_t c);

}  // namespace dtirex::utf8
