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

#include "infercal/ter.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <unordered_map>

#include "infercal/util.hpp"

namespace infercal {

namespace {

using Ids = std::vector<int>;

// Token surfaces are compared by exact string equality; interning once per
// pair keeps the DP loops on plain ints.
void intern_pair(const Sentence& hyp, const Sentence& ref, Ids& h, Ids& r) {
  std::unordered_map<std::string, int> ids;
  auto to_id = [&](const std::string& s) {
    auto [it, inserted] = ids.emplace(s, static_cast<int>(ids.size()));
    (void)inserted;
    return it->second;
  };
  h.clear();
  r.clear();
  h.reserve(hyp.size());
  r.reserve(ref.size());
  for (const auto& t : hyp.tokens) h.push_back(to_id(t.surface));
  for (const auto& t : ref.tokens) r.push_back(to_id(t.surface));
}

int lev_count_ids(const Ids& hyp, const Ids& ref) {
  const std::size_t H = hyp.size(), R = ref.size();
  std::vector<int> prev(R + 1), cur(R + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= H; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= R; ++j) {
      const int sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[R];
}

std::pair<int, std::vector<EditOp>> lev_align_ids(const Ids& hyp, const Ids& ref) {
  const int H = static_cast<int>(hyp.size()), R = static_cast<int>(ref.size());
  std::vector<int> dp((H + 1) * (R + 1));
  auto at = [&](int i, int j) -> int& { return dp[i * (R + 1) + j]; };
  for (int i = 0; i <= H; ++i) at(i, 0) = i;
  for (int j = 0; j <= R; ++j) at(0, j) = j;
  for (int i = 1; i <= H; ++i)
    for (int j = 1; j <= R; ++j) {
      const int sub = at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }

  // Backtrack; op preference on equal cost is Match > Substitute > Delete > Insert.
  std::vector<EditOp> ops;
  int i = H, j = R;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && hyp[i - 1] == ref[j - 1] && at(i - 1, j - 1) == at(i, j)) {
      ops.push_back({EditKind::Match, i - 1, i, j - 1, j, 0});
      --i;
      --j;
    } else if (i > 0 && j > 0 && at(i - 1, j - 1) + 1 == at(i, j)) {
      ops.push_back({EditKind::Substitute, i - 1, i, j - 1, j, 0});
      --i;
      --j;
    } else if (j > 0 && at(i, j - 1) + 1 == at(i, j)) {
      ops.push_back({EditKind::Delete, i, i, j - 1, j, 0});
      --j;
    } else {
      ops.push_back({EditKind::Insert, i - 1, i, j, j, 0});
      --i;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return {at(H, R), std::move(ops)};
}

bool block_occurs(const Ids& ref, const Ids& cur, int i, int len) {
  const int R = static_cast<int>(ref.size());
  for (int r0 = 0; r0 + len <= R; ++r0) {
    bool ok = true;
    for (int k = 0; k < len; ++k)
      if (ref[r0 + k] != cur[i + k]) {
        ok = false;
        break;
      }
    if (ok) return true;
  }
  return false;
}

template <typename T>
std::vector<T> splice_block(const std::vector<T>& v, int i, int len, int j) {
  std::vector<T> reduced;
  reduced.reserve(v.size() - len);
  reduced.insert(reduced.end(), v.begin(), v.begin() + i);
  reduced.insert(reduced.end(), v.begin() + i + len, v.end());
  std::vector<T> out;
  out.reserve(v.size());
  out.insert(out.end(), reduced.begin(), reduced.begin() + j);
  out.insert(out.end(), v.begin() + i, v.begin() + i + len);
  out.insert(out.end(), reduced.begin() + j, reduced.end());
  return out;
}

void require_nonempty(const Sentence& hyp, const Sentence& ref) {
  if (hyp.empty() || ref.empty())
    throw ComputeError("TER alignment requires non-empty hypothesis and reference");
}

}  // namespace

std::string label_to_string(const TokenLabel& label) {
  std::string out;
  switch (label.value) {
    case LabelValue::C: out = "C"; break;
    case LabelValue::S: out = "S"; break;
    case LabelValue::I: out = "I"; break;
  }
  if (label.under_translation_adjacent) out += "+D";
  return out;
}

TokenLabel label_from_string(const std::string& text) {
  TokenLabel label;
  std::string core = text;
  if (core.size() > 2 && core.compare(core.size() - 2, 2, "+D") == 0) {
    label.under_translation_adjacent = true;
    core = core.substr(0, core.size() - 2);
  }
  if (core == "C")
    label.value = LabelValue::C;
  else if (core == "S")
    label.value = LabelValue::S;
  else if (core == "I")
    label.value = LabelValue::I;
  else
    throw UsageError("unknown token label '" + text + "'");
  return label;
}

std::pair<int, std::vector<EditOp>> levenshtein_align(const Sentence& hyp,
                                                      const Sentence& ref) {
  require_nonempty(hyp, ref);
  Ids h, r;
  intern_pair(hyp, ref, h, r);
  return lev_align_ids(h, r);
}

int levenshtein_count(const Sentence& hyp, const Sentence& ref) {
  require_nonempty(hyp, ref);
  Ids h, r;
  intern_pair(hyp, ref, h, r);
  return lev_count_ids(h, r);
}

TerResult ter_align(const Sentence& hyp, const Sentence& ref, int max_shift_distance) {
  require_nonempty(hyp, ref);
  if (max_shift_distance < 0)
    throw UsageError("max shift distance must be non-negative");

  Ids cur, r;
  intern_pair(hyp, ref, cur, r);
  const int H = static_cast<int>(cur.size());

  TerResult result;
  result.permutation.resize(H);
  std::iota(result.permutation.begin(), result.permutation.end(), 0);

  int cur_lev = lev_count_ids(cur, r);

  // Greedy shift loop. A shift costs one edit, so it is only worth taking
  // while it removes at least two Levenshtein edits.
  while (true) {
    struct Cand {
      int gain = 1;  // anything <= 1 does not reduce the total
      int i = 0, dist = 0, len = 0, j = 0;
      bool found = false;
    } best;

    for (int i = 0; i < H; ++i) {
      for (int len = 1; i + len <= H; ++len) {
        // If this block has no contiguous occurrence in the reference,
        // no longer block starting here can have one either.
        if (!block_occurs(r, cur, i, len)) break;
        for (int j = 0; j + len <= H; ++j) {
          if (j == i) continue;
          const int dist = std::abs(j - i);
          if (dist > max_shift_distance) continue;
          const Ids cand = splice_block(cur, i, len, j);
          const int gain = cur_lev - lev_count_ids(cand, r);
          const bool better =
              gain > best.gain ||
              (gain == best.gain && best.found &&
               std::tuple(i, dist, len, j) < std::tuple(best.i, best.dist, best.len, best.j));
          if (gain > 1 && (!best.found || better)) {
            best = {gain, i, dist, len, j, true};
          }
        }
      }
    }
    if (!best.found) break;

    cur = splice_block(cur, best.i, best.len, best.j);
    result.permutation = splice_block(result.permutation, best.i, best.len, best.j);
    result.shifts.push_back({EditKind::Shift, best.i, best.i + best.len, 0, 0,
                             best.j - best.i});
    ++result.shift_count;
    cur_lev -= best.gain;
  }

  auto [lev_edits, path] = lev_align_ids(cur, r);
  result.path = std::move(path);
  result.edits = result.shift_count + lev_edits;
  result.ter_score = static_cast<double>(result.edits) / static_cast<double>(r.size());

  result.labels.assign(H, TokenLabel{});
  for (const auto& op : result.path) {
    switch (op.kind) {
      case EditKind::Match:
        result.labels[result.permutation[op.hyp_begin]].value = LabelValue::C;
        break;
      case EditKind::Substitute:
        result.labels[result.permutation[op.hyp_begin]].value = LabelValue::S;
        break;
      case EditKind::Insert:
        result.labels[result.permutation[op.hyp_begin]].value = LabelValue::I;
        break;
      case EditKind::Delete:
        result.deleted_ref_indices.push_back(op.ref_begin);
        break;
      case EditKind::Shift:
        break;
    }
  }
  return result;
}

std::vector<TokenLabel> map_deletions(const TerResult& ter, int hyp_len,
                                      DeletionAttach attach) {
  if (static_cast<int>(ter.permutation.size()) != hyp_len ||
      static_cast<int>(ter.labels.size()) != hyp_len)
    throw ComputeError("TER result does not match the given hypothesis length");

  std::vector<TokenLabel> labels = ter.labels;
  if (hyp_len == 0) return labels;

  auto consumes_hyp = [](const EditOp& op) {
    return op.kind == EditKind::Match || op.kind == EditKind::Substitute ||
           op.kind == EditKind::Insert;
  };

  const int n_ops = static_cast<int>(ter.path.size());
  for (int k = 0; k < n_ops; ++k) {
    if (ter.path[k].kind != EditKind::Delete) continue;
    int flagged = -1;
    if (attach == DeletionAttach::Following) {
      for (int m = k + 1; m < n_ops; ++m)
        if (consumes_hyp(ter.path[m])) {
          flagged = ter.permutation[ter.path[m].hyp_begin];
          break;
        }
      if (flagged < 0) flagged = ter.permutation[hyp_len - 1];
    } else {
      for (int m = k - 1; m >= 0; --m)
        if (consumes_hyp(ter.path[m])) {
          flagged = ter.permutation[ter.path[m].hyp_begin];
          break;
        }
      if (flagged < 0) flagged = ter.permutation[0];
    }
    labels[flagged].under_translation_adjacent = true;
  }
  return labels;
}

}  // namespace infercal
