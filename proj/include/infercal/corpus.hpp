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

#ifndef INFERCAL_CORPUS_HPP
#define INFERCAL_CORPUS_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace infercal {

// Default BPE continuation marker; override per call for other conventions.
inline constexpr const char* kDefaultSubwordMarker = "@@";

struct Token {
  std::string surface;
  bool is_subword = false;  // surface carries the continuation marker

  bool operator==(const Token& other) const { return surface == other.surface; }
};

struct Sentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }

  std::vector<std::string> surfaces() const;
  std::string joined() const;

  bool operator==(const Sentence& other) const { return tokens == other.tokens; }
};

Sentence make_sentence(const std::vector<std::string>& surfaces,
                       const std::string& marker = kDefaultSubwordMarker);

using AlignmentLink = std::pair<int, int>;  // (source_index, target_index)
using Alignment = std::set<AlignmentLink>;

struct ParallelPair {
  Sentence source;
  Sentence reference;
  std::optional<Sentence> hypothesis;
  std::optional<Alignment> alignment;           // source -> target links
  std::optional<std::vector<std::string>> pos_tags;  // one per hypothesis token

  // The side alignment target indices refer to.
  const Sentence& target_side() const {
    return hypothesis ? *hypothesis : reference;
  }
};

struct VocabStats {
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::size_t> rank;  // 1 = most frequent

  std::size_t size() const { return counts.size(); }
};

// --- corpus text -----------------------------------------------------------
// One sentence per line, tokens space-separated, UTF-8, CRLF tolerated.
// Blank lines are rejected (with the offending line number).
std::vector<Sentence> parse_corpus(const std::string& path,
                                   const std::string& marker = kDefaultSubwordMarker);
Sentence parse_sentence_line(const std::string& line, const std::string& file,
                             std::size_t lineno,
                             const std::string& marker = kDefaultSubwordMarker);
void write_corpus(const std::vector<Sentence>& sentences, const std::string& path);

// --- Pharaoh alignments ----------------------------------------------------
// Whitespace-separated "i-j" pairs, 0-based, duplicates collapse.
// An all-whitespace line denotes an unaligned pair (empty set).
Alignment parse_alignment(const std::string& line);
std::vector<Alignment> parse_alignment_file(const std::string& path);
std::string format_alignment(const Alignment& links);
void write_alignment_file(const std::vector<Alignment>& all, const std::string& path);

// Validates link ranges against the pair before attaching.
void attach_alignment(ParallelPair& pair, const Alignment& links);

// --- POS tag files ---------------------------------------------------------
// Space-separated tags, line-aligned with the hypothesis file. A line may
// carry either one tag per hypothesis token, or one tag per full word; in
// the latter case sub-word fragments inherit the word's tag.
std::vector<std::vector<std::string>> parse_pos_file(const std::string& path);
void attach_pos(ParallelPair& pair, const std::vector<std::string>& tags,
                const std::string& file = "<pos>", std::size_t lineno = 0);

// --- vocabulary statistics -------------------------------------------------
// Exact occurrence counts; ranks ordered by count (desc), ties broken by
// first occurrence in the corpus, then lexicographically.
VocabStats build_vocab_stats(const std::vector<Sentence>& corpus);

// --- pairing ---------------------------------------------------------------
// Line-aligned file loading; files must have the same number of lines.
std::vector<ParallelPair> load_parallel(
    const std::string& source_path, const std::string& reference_path,
    const std::optional<std::string>& hypothesis_path = std::nullopt,
    const std::optional<std::string>& alignment_path = std::nullopt,
    const std::optional<std::string>& pos_path = std::nullopt,
    const std::string& marker = kDefaultSubwordMarker);

}  // namespace infercal

#endif  // INFERCAL_CORPUS_HPP
