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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dtirex/train.hpp"
#include "synthetic.hpp"

using namespace dtirex;
using namespace dtirex::testing;

namespace {

Checkpoint sample(HeadKind head = HeadKind::RbertCnn, bool cls = true) {
  Checkpoint c;
  c.model = small_config(head, cls);
  c.vocab = word_vocab(c.model.vocab_size);
  c.params = init_params(c.model, 77);
  // Values with full mantissas and awkward exponents.
  Rng rng(3);
  for (auto& t : c.params.tensors()) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      t.value.data()[i] += std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(40)) - 20);
    }
  }
  c.labels = default_label_table();
  c.train.learning_rate = 0.1 + 0.2;
  c.train.seed = 0xfeedfacecafebeefULL;
  c.epochs_completed = 3;
  return c;
}

std::string serialized(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(c, out);
  return out.str();
}

CheckpointErrc error_of(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_checkpoint(in);
  } catch (const CheckpointError& e) {
    return e.code();
  }
  FAIL("expected CheckpointError");
  return CheckpointErrc::Corrupt;
}

}  // namespace

TEST_CASE("checkpoints round-trip bit-exactly") {
  for (const auto& [head, cls] : {std::pair{HeadKind::RbertCnn, true}, std::pair{HeadKind::RbertCnn, false},
                                  std::pair{HeadKind::Model1, true}}) {
    const Checkpoint c = sample(head, cls);
    std::istringstream in(serialized(c));
    const Checkpoint back = read_checkpoint(in);
    CHECK(back.params.bitwise_equal(c.params));
    CHECK(back.model == c.model);
    CHECK(back.train == c.train);
    CHECK(back.vocab == c.vocab);
    CHECK(back.labels == c.labels);
    CHECK(back.epochs_completed == 3);
    CHECK(serialized(back) == serialized(c));
  }
}

TEST_CASE("save and load through a file") {
  const auto dir = std::filesystem::temp_directory_path() / "dtirex_test_checkpoint";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.rext";
  const Checkpoint c = sample();
  save_checkpoint(c, path);
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  CHECK(load_checkpoint(path).params.bitwise_equal(c.params));
  std::filesystem::remove_all(dir);

  try {
    load_checkpoint(dir / "missing.rext");
    FAIL("expected Io");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointErrc::Io);
    CHECK(std::string(e.what()).find("missing.rext") != std::string::npos);
  }
}

TEST_CASE("truncated files never load") {
  const std::string bytes = serialized(sample());
  const std::size_t header = bytes.find("\nend\n");
  REQUIRE(header != std::string::npos);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, header / 2, header + 2, header + 5,
                          bytes.size() - 1}) {
    CAPTURE(cut);
    const CheckpointErrc code = error_of(bytes.substr(0, cut));
    CHECK((code == CheckpointErrc::FormatVersionMismatch || code == CheckpointErrc::Io));
  }
}

TEST_CASE("edited manifest shape is a ShapeMismatch") {
  std::string bytes = serialized(sample());
  const std::string from = "tensor=embed.token f64 30x16 ";
  const std::size_t at = bytes.find(from);
  REQUIRE(at != std::string::npos);
  bytes.replace(at, from.size(), "tensor=embed.token f64 30x15 ");
  CHECK(error_of(bytes) == CheckpointErrc::ShapeMismatch);
}

TEST_CASE("bad magic, unknown keys and trailing bytes") {
  std::string bytes = serialized(sample());
  CHECK(error_of("REXT2" + bytes.substr(5)) == CheckpointErrc::FormatVersionMismatch);
  CHECK(error_of(bytes + "x") == CheckpointErrc::Corrupt);
  std::string extra = bytes;
  extra.insert(extra.find('\n') + 1, "config.colour=blue\n");
  CHECK(error_of(extra) == CheckpointErrc::Corrupt);
}
