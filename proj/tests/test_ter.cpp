// Copyright (c) 2026 The infercal Authors. All Rights Reserved.
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "infercal/corpus.hpp"
#include "infercal/ter.hpp"
#include "infercal/util.hpp"
#include "support/ter_oracle.hpp"

using namespace infercal;

namespace {

Sentence sent(const std::vector<std::string>& words) {
  return make_sentence(words, kDefaultSubwordMarker);
}

std::vector<std::string> labels_of(const std::vector<TokenLabel>& labels) {
  std::vector<std::string> out;
  for (const TokenLabel& l : labels) out.push_back(label_to_string(l));
  return out;
}

std::vector<std::string> random_words(RandomSource& rng, int max_len, int alphabet) {
  const int n = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_len)));
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(std::string(1, static_cast<char>('a' + rng.uniform_int(
                                     static_cast<std::uint64_t>(alphabet)))));
  }
  return out;
}

}  // namespace

TEST_CASE("identical sentences need no edits") {
  const TerResult r = ter_align(sent({"a", "b", "c"}), sent({"a", "b", "c"}));
  CHECK(r.edits == 0);
  CHECK(r.shift_count == 0);
  CHECK(r.ter_score == 0.0);
  CHECK(labels_of(r.labels) == std::vector<std::string>{"C", "C", "C"});
}

TEST_CASE("substitution is labeled S at the right position") {
  const TerResult r = ter_align(sent({"a", "x", "c"}), sent({"a", "b", "c"}));
  CHECK(r.edits == 1);
  CHECK(doctest::Approx(r.ter_score) == 1.0 / 3.0);
  CHECK(labels_of(r.labels) == std::vector<std::string>{"C", "S", "C"});
}

TEST_CASE("extra hypothesis token is labeled I") {
  const TerResult r = ter_align(sent({"a", "b", "x", "c"}), sent({"a", "b", "c"}));
  CHECK(r.edits == 1);
  CHECK(labels_of(r.labels) == std::vector<std::string>{"C", "C", "I", "C"});
  CHECK(r.deleted_ref_indices.empty());
}

TEST_CASE("missing reference token is recorded as a deletion, not a token label") {
  const TerResult r = ter_align(sent({"a", "c"}), sent({"a", "b", "c"}));
  CHECK(r.edits == 1);
  CHECK(labels_of(r.labels) == std::vector<std::string>{"C", "C"});
  CHECK(r.deleted_ref_indices == std::vector<int>{1});
}

TEST_CASE("deletions flag the following token, or the preceding one on request") {
  const TerResult r = ter_align(sent({"a", "c"}), sent({"a", "b", "c"}));
  const auto following = map_deletions(r, 2, DeletionAttach::Following);
  CHECK(labels_of(following) == std::vector<std::string>{"C", "C+D"});
  const auto preceding = map_deletions(r, 2, DeletionAttach::Preceding);
  CHECK(labels_of(preceding) == std::vector<std::string>{"C+D", "C"});
}

TEST_CASE("a trailing deletion falls back to the last hypothesis token") {
  const TerResult r = ter_align(sent({"a"}), sent({"a", "b"}));
  CHECK(r.edits == 1);
  const auto labels = map_deletions(r, 1, DeletionAttach::Following);
  CHECK(labels_of(labels) == std::vector<std::string>{"C+D"});
}

TEST_CASE("a leading deletion under preceding attach falls back to the first token") {
  const TerResult r = ter_align(sent({"b"}), sent({"a", "b"}));
  CHECK(r.edits == 1);
  const auto labels = map_deletions(r, 1, DeletionAttach::Preceding);
  CHECK(labels_of(labels) == std::vector<std::string>{"C+D"});
}

TEST_CASE("one shift beats two edits and shifted tokens stay C") {
  const TerResult r = ter_align(sent({"c", "a", "b"}), sent({"a", "b", "c"}));
  CHECK(r.edits == 1);
  CHECK(r.shift_count == 1);
  CHECK(labels_of(r.labels) == std::vector<std::string>{"C", "C", "C"});
}

TEST_CASE("shifts are disabled when the distance budget is zero") {
  const TerResult r = ter_align(sent({"c", "a", "b"}), sent({"a", "b", "c"}), 0);
  CHECK(r.shift_count == 0);
  CHECK(r.edits == levenshtein_count(sent({"c", "a", "b"}), sent({"a", "b", "c"})));
}

TEST_CASE("swapping two tokens is one shift, not two substitutions") {
  const TerResult r = ter_align(sent({"b", "a"}), sent({"a", "b"}));
  CHECK(r.shift_count == 1);
  CHECK(r.edits == 1);
  CHECK(labels_of(r.labels) == std::vector<std::string>{"C", "C"});
}

TEST_CASE("a shift is only taken when it saves more than its own cost") {
  // Moving "b" to the front would save one substitution, but the shift
  // itself costs one edit, so the aligner keeps the plain alignment.
  const TerResult r = ter_align(sent({"a", "b"}), sent({"b", "c"}));
  CHECK(r.shift_count == 0);
  CHECK(r.edits == 2);
}

TEST_CASE("levenshtein backtrack prefers substitutions over insert-delete pairs") {
  const auto [edits, ops] = levenshtein_align(sent({"x", "y"}), sent({"a", "b"}));
  CHECK(edits == 2);
  REQUIRE(ops.size() == 2);
  CHECK(ops[0].kind == EditKind::Substitute);
  CHECK(ops[1].kind == EditKind::Substitute);
}

TEST_CASE("empty sentences are rejected") {
  CHECK_THROWS_AS(ter_align(sent({}), sent({"a"})), ComputeError);
  CHECK_THROWS_AS(ter_align(sent({"a"}), sent({})), ComputeError);
  CHECK_THROWS_AS(levenshtein_count(sent({}), sent({"a"})), ComputeError);
}

TEST_CASE("negative shift distance is a usage error") {
  CHECK_THROWS_AS(ter_align(sent({"a"}), sent({"a"}), -1), UsageError);
}

TEST_CASE("label strings round-trip") {
  for (const std::string text : {"C", "S", "I", "C+D", "S+D", "I+D"}) {
    CHECK(label_to_string(label_from_string(text)) == text);
  }
  CHECK_THROWS_AS(label_from_string("Q"), UsageError);
  CHECK_THROWS_AS(label_from_string(""), UsageError);
}

TEST_CASE("edit counts match the textbook oracle when shifts are disabled") {
  RandomSource rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto h = random_words(rng, 12, 6);
    const auto r = random_words(rng, 12, 6);
    const int expect = testsupport::oracle_levenshtein(h, r);
    CHECK(levenshtein_count(sent(h), sent(r)) == expect);
    CHECK(ter_align(sent(h), sent(r), 0).edits == expect);
  }
}

TEST_CASE("greedy shifting never beats the exhaustive optimum") {
  RandomSource rng(77);
  int equal = 0;
  const int trials = 120;
  for (int trial = 0; trial < trials; ++trial) {
    const auto h = random_words(rng, 6, 4);
    const auto r = random_words(rng, 6, 4);
    const int greedy = ter_align(sent(h), sent(r)).edits;
    const int optimum = testsupport::oracle_best_shifted_cost(h, r, 3);
    CHECK(greedy >= optimum);
    equal += greedy == optimum;
  }
  // The greedy loop should find the optimum nearly always at these lengths.
  CHECK(equal >= trials * 95 / 100);
}

TEST_CASE("ter score divides total edits by the reference length") {
  const TerResult r = ter_align(sent({"x", "b"}), sent({"a", "b", "c", "d"}));
  CHECK(r.ter_score == doctest::Approx(static_cast<double>(r.edits) / 4.0));
}
