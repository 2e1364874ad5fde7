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

#include "dtirex/corpus.hpp"
#include "dtirex/eval.hpp"
#include "dtirex/model.hpp"
#include "dtirex/params.hpp"
#include "dtirex/preprocess.hpp"
#include "dtirex/tokenizer.hpp"
#include "dtirex/train.hpp"
#include "dtirex/utf8.hpp"
