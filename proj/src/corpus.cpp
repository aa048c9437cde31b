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

#include "infercal/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "infercal/util.hpp"

namespace infercal {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open input file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open output file: " + path);
  return out;
}

bool has_marker(const std::string& surface, const std::string& marker) {
  return !marker.empty() && surface.size() >= marker.size() &&
         surface.compare(surface.size() - marker.size(), marker.size(), marker) == 0;
}

}  // namespace

std::vector<std::string> Sentence::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

std::string Sentence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
  }
  return out;
}

Sentence make_sentence(const std::vector<std::string>& surfaces,
                       const std::string& marker) {
  Sentence s;
  s.tokens.reserve(surfaces.size());
  for (const auto& w : surfaces) s.tokens.push_back({w, has_marker(w, marker)});
  return s;
}

Sentence parse_sentence_line(const std::string& line, const std::string& file,
                             std::size_t lineno, const std::string& marker) {
  const std::string clean = strip_cr(line);
  if (!valid_utf8(clean)) throw ParseError(file, lineno, "invalid UTF-8");
  const auto words = split_ws(clean);
  if (words.empty()) throw ParseError(file, lineno, "blank line in corpus");
  return make_sentence(words, marker);
}

std::vector<Sentence> parse_corpus(const std::string& path, const std::string& marker) {
  auto in = open_input(path);
  std::vector<Sentence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    out.push_back(parse_sentence_line(line, path, lineno, marker));
  }
  return out;
}

void write_corpus(const std::vector<Sentence>& sentences, const std::string& path) {
  auto out = open_output(path);
  for (const auto& s : sentences) out << s.joined() << '\n';
}

Alignment parse_alignment(const std::string& line) {
  Alignment links;
  for (const auto& item : split_ws(strip_cr(line))) {
    const auto dash = item.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == item.size())
      throw UsageError("malformed alignment item '" + item + "' (expected i-j)");
    int src, tgt;
    try {
      std::size_t used;
      src = std::stoi(item.substr(0, dash), &used);
      if (used != dash) throw std::invalid_argument(item);
      const std::string rest = item.substr(dash + 1);
      tgt = std::stoi(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("non-numeric alignment item '" + item + "'");
    }
    if (src < 0 || tgt < 0)
      throw UsageError("negative alignment index in '" + item + "'");
    links.emplace(src, tgt);
  }
  return links;
}

std::vector<Alignment> parse_alignment_file(const std::string& path) {
  auto in = open_input(path);
  std::vector<Alignment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      out.push_back(parse_alignment(line));
    } catch (const UsageError& e) {
      throw ParseError(path, lineno, e.what());
    }
  }
  return out;
}

std::string format_alignment(const Alignment& links) {
  std::string out;
  for (const auto& [s, t] : links) {
    if (!out.empty()) out += ' ';
    out += std::to_string(s) + "-" + std::to_string(t);
  }
  return out;
}

void write_alignment_file(const std::vector<Alignment>& all, const std::string& path) {
  auto out = open_output(path);
  for (const auto& links : all) out << format_alignment(links) << '\n';
}

void attach_alignment(ParallelPair& pair, const Alignment& links) {
  const int src_len = static_cast<int>(pair.source.size());
  const int tgt_len = static_cast<int>(pair.target_side().size());
  for (const auto& [s, t] : links) {
    if (s >= src_len)
      throw UsageError("alignment source index " + std::to_string(s) +
                       " out of range (source length " + std::to_string(src_len) + ")");
    if (t >= tgt_len)
      throw UsageError("alignment target index " + std::to_string(t) +
                       " out of range (target length " + std::to_string(tgt_len) + ")");
  }
  pair.alignment = links;
}

std::vector<std::vector<std::string>> parse_pos_file(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string clean = strip_cr(line);
    if (!valid_utf8(clean)) throw ParseError(path, lineno, "invalid UTF-8");
    const auto tags = split_ws(clean);
    if (tags.empty()) throw ParseError(path, lineno, "blank line in POS file");
    out.push_back(tags);
  }
  return out;
}

void attach_pos(ParallelPair& pair, const std::vector<std::string>& tags,
                const std::string& file, std::size_t lineno) {
  if (!pair.hypothesis)
    throw UsageError("POS tags supplied for a pair without a hypothesis");
  const Sentence& hyp = *pair.hypothesis;

  if (tags.size() == hyp.size()) {
    pair.pos_tags = tags;
    return;
  }

  // One tag per full word: expand so that every fragment of a sub-word
  // split inherits the word's tag.
  std::size_t words = 0;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    if (!hyp[i].is_subword || i + 1 == hyp.size()) ++words;
  }
  if (tags.size() != words)
    throw ParseError(file, lineno,
                     "POS tag count " + std::to_string(tags.size()) +
                         " matches neither token count " + std::to_string(hyp.size()) +
                         " nor word count " + std::to_string(words));

  std::vector<std::string> expanded;
  expanded.reserve(hyp.size());
  std::size_t w = 0;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    expanded.push_back(tags[w]);
    if (!hyp[i].is_subword) ++w;  // marker-less token ends the word
  }
  pair.pos_tags = std::move(expanded);
}

VocabStats build_vocab_stats(const std::vector<Sentence>& corpus) {
  if (corpus.empty()) throw UsageError("cannot build vocabulary statistics from an empty corpus");

  VocabStats stats;
  std::map<std::string, std::size_t> first_seen;
  std::size_t pos = 0;
  for (const auto& s : corpus) {
    for (const auto& t : s.tokens) {
      auto [it, inserted] = stats.counts.emplace(t.surface, 0);
      ++it->second;
      if (inserted) first_seen[t.surface] = pos;
      ++pos;
    }
  }

  struct Entry {
    const std::string* surface;
    std::size_t count;
    std::size_t first;
  };
  std::vector<Entry> entries;
  entries.reserve(stats.counts.size());
  for (const auto& [surface, count] : stats.counts)
    entries.push_back({&surface, count, first_seen[surface]});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.first != b.first) return a.first < b.first;
    return *a.surface < *b.surface;
  });
  for (std::size_t i = 0; i < entries.size(); ++i)
    stats.rank[*entries[i].surface] = i + 1;
  return stats;
}

std::vector<ParallelPair> load_parallel(const std::string& source_path,
                                        const std::string& reference_path,
                                        const std::optional<std::string>& hypothesis_path,
                                        const std::optional<std::string>& alignment_path,
                                        const std::optional<std::string>& pos_path,
                                        const std::string& marker) {
  const auto sources = parse_corpus(source_path, marker);
  const auto references = parse_corpus(reference_path, marker);
  if (sources.size() != references.size())
    throw UsageError("line count mismatch: " + source_path + " has " +
                     std::to_string(sources.size()) + " lines, " + reference_path +
                     " has " + std::to_string(references.size()));

  std::vector<ParallelPair> pairs(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    pairs[i].source = sources[i];
    pairs[i].reference = references[i];
  }

  if (hypothesis_path) {
    const auto hyps = parse_corpus(*hypothesis_path, marker);
    if (hyps.size() != pairs.size())
      throw UsageError("line count mismatch: " + *hypothesis_path);
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].hypothesis = hyps[i];
  }
  if (alignment_path) {
    const auto aligns = parse_alignment_file(*alignment_path);
    if (aligns.size() != pairs.size())
      throw UsageError("line count mismatch: " + *alignment_path);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      try {
        attach_alignment(pairs[i], aligns[i]);
      } catch (const UsageError& e) {
        throw ParseError(*alignment_path, i + 1, e.what());
      }
    }
  }
  if (pos_path) {
    const auto tags = parse_pos_file(*pos_path);
    if (tags.size() != pairs.size())
      throw UsageError("line count mismatch: " + *pos_path);
    for (std::size_t i = 0; i < pairs.size(); ++i)
      attach_pos(pairs[i], tags[i], *pos_path, i + 1);
  }
  return pairs;
}

}  // namespace infercal
