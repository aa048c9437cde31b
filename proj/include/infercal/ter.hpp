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

#ifndef INFERCAL_TER_HPP
#define INFERCAL_TER_HPP

#include <string>
#include <vector>

#include "infercal/corpus.hpp"

namespace infercal {

enum class EditKind { Match, Substitute, Insert, Delete, Shift };

// One step of an alignment path. Match/Substitute consume one hypothesis and
// one reference position, Insert one hypothesis position (a spurious token),
// Delete one reference position (a missing token). Shift moves the block
// [hyp_begin, hyp_end) by `distance` positions and touches no reference span.
struct EditOp {
  EditKind kind;
  int hyp_begin = 0;
  int hyp_end = 0;
  int ref_begin = 0;
  int ref_end = 0;
  int distance = 0;  // Shift only; signed (positive = moved right)
};

enum class LabelValue { C, S, I };

struct TokenLabel {
  LabelValue value = LabelValue::C;
  bool under_translation_adjacent = false;

  bool operator==(const TokenLabel& o) const {
    return value == o.value && under_translation_adjacent == o.under_translation_adjacent;
  }
};

std::string label_to_string(const TokenLabel& label);
TokenLabel label_from_string(const std::string& text);

struct TerResult {
  int edits = 0;        // substitutions + insertions + deletions + shifts
  int shift_count = 0;
  std::vector<TokenLabel> labels;        // one per original hypothesis token
  std::vector<int> deleted_ref_indices;  // reference positions labeled D
  double ter_score = 0.0;                // edits / reference length

  // Final Levenshtein path over the shifted hypothesis, plus the applied
  // shifts and the permutation mapping shifted position -> original index.
  std::vector<EditOp> path;
  std::vector<EditOp> shifts;
  std::vector<int> permutation;
};

// Minimum insert/delete/substitute alignment. Ties between equally cheap
// paths resolve Match > Substitute > Delete > Insert.
std::pair<int, std::vector<EditOp>> levenshtein_align(const Sentence& hyp,
                                                      const Sentence& ref);

// Plain edit count without a path (two-row DP).
int levenshtein_count(const Sentence& hyp, const Sentence& ref);

// Full TER alignment: greedily apply the block shift that most reduces the
// remaining Levenshtein edits (one edit per shift, applied only while a shift
// lowers the combined total), then label tokens from the final path.
// Shifted-then-matched tokens come out as C; shifts only affect the count.
TerResult ter_align(const Sentence& hyp, const Sentence& ref, int max_shift_distance = 50);

enum class DeletionAttach { Following, Preceding };

// Map reference deletions onto hypothesis tokens: flag the token immediately
// following (or preceding) each deletion point in the final alignment path,
// falling back to the nearest end token when the deletion is terminal.
std::vector<TokenLabel> map_deletions(const TerResult& ter, int hyp_len,
                                      DeletionAttach attach = DeletionAttach::Following);

}  // namespace infercal

#endif  // INFERCAL_TER_HPP
