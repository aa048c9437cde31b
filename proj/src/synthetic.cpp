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

#include <algorithm>
#include <cctype>
#include <string>
#include <unordered_map>
#include <vector>

#include "infercal/toymodel.hpp"

namespace infercal {

void SyntheticConfig::validate() const {
  if (merge_pairs < 0 || split_types < 0) {
    throw UsageError("synthetic config: merge_pairs and split_types cannot be negative");
  }
  if (vocab_size < 2 * merge_pairs + split_types + 2) {
    throw UsageError("synthetic config: vocab_size " + std::to_string(vocab_size) +
                     " too small; need at least " +
                     std::to_string(2 * merge_pairs + split_types + 2) +
                     " types for the requested merges and splits plus two plain types");
  }
  if (!(noise_rate >= 0.0) || !(noise_rate < 1.0)) {
    throw UsageError("synthetic config: noise_rate must lie in [0,1)");
  }
  if (min_len < 1 || max_len < min_len) {
    throw UsageError("synthetic config: need 1 <= min_len <= max_len");
  }
}

// Source types are assigned fixed roles by index: types 2k and 2k+1 form
// merge pair k, the next split_types types always split into two sub-word
// pieces, and everything above is a plain type with an identity image.
// Adjacent plain types in descending order swap in the target.
SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg, int n) {
  cfg.validate();
  if (n < 1) throw UsageError("generate_synthetic: n must be >= 1");

  const int v = cfg.vocab_size;
  auto merge_index = [&](int a, int b) -> int {
    if (a >= 0 && a < 2 * cfg.merge_pairs && a % 2 == 0 && b == a + 1) return a / 2;
    return -1;
  };
  auto split_index = [&](int t) -> int {
    const int k = t - 2 * cfg.merge_pairs;
    return (k >= 0 && k < cfg.split_types) ? k : -1;
  };
  auto is_plain = [&](int t) { return t >= 2 * cfg.merge_pairs + cfg.split_types; };

  SyntheticCorpus corpus;
  corpus.src_tokens.reserve(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i) corpus.src_tokens.push_back("s" + std::to_string(i));
  for (int i = 0; i < v; ++i) {
    if (split_index(i) < 0) corpus.tgt_tokens.push_back("t" + std::to_string(i));
  }
  for (int k = 0; k < cfg.merge_pairs; ++k) {
    corpus.tgt_tokens.push_back("m" + std::to_string(k));
  }
  for (int k = 0; k < cfg.split_types; ++k) {
    corpus.tgt_tokens.push_back("u" + std::to_string(k) + "@@");
    corpus.tgt_tokens.push_back("v" + std::to_string(k));
  }
  std::unordered_map<std::string, int> tgt_index;
  for (std::size_t i = 0; i < corpus.tgt_tokens.size(); ++i) {
    tgt_index[corpus.tgt_tokens[i]] = static_cast<int>(i);
  }

  // Zipf(1) weights over source types: w_i proportional to 1/(i+1).
  std::vector<double> cum(static_cast<std::size_t>(v));
  double total = 0.0;
  for (int i = 0; i < v; ++i) {
    total += 1.0 / (i + 1);
    cum[static_cast<std::size_t>(i)] = total;
  }

  RandomSource rng(cfg.seed);
  auto draw_type = [&] {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return std::min(static_cast<int>(it - cum.begin()), v - 1);
  };

  corpus.pairs.reserve(static_cast<std::size_t>(n));
  corpus.noise_mask.reserve(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    const int len =
        cfg.min_len + static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(cfg.max_len - cfg.min_len + 1)));
    std::vector<int> src(static_cast<std::size_t>(len));
    for (int& t : src) t = draw_type();

    std::vector<std::string> tgt;
    Alignment align;
    int i = 0;
    while (i < len) {
      const std::size_t at = static_cast<std::size_t>(i);
      const int pos = static_cast<int>(tgt.size());
      const int mk = (i + 1 < len) ? merge_index(src[at], src[at + 1]) : -1;
      if (mk >= 0) {
        align.insert({i, pos});
        align.insert({i + 1, pos});
        tgt.push_back("m" + std::to_string(mk));
        i += 2;
        continue;
      }
      const int sk = split_index(src[at]);
      if (sk >= 0) {
        align.insert({i, pos});
        align.insert({i, pos + 1});
        tgt.push_back("u" + std::to_string(sk) + "@@");
        tgt.push_back("v" + std::to_string(sk));
        i += 1;
        continue;
      }
      if (i + 1 < len && is_plain(src[at]) && is_plain(src[at + 1]) && src[at] > src[at + 1]) {
        align.insert({i, pos + 1});
        align.insert({i + 1, pos});
        tgt.push_back("t" + std::to_string(src[at + 1]));
        tgt.push_back("t" + std::to_string(src[at]));
        i += 2;
        continue;
      }
      align.insert({i, pos});
      tgt.push_back("t" + std::to_string(src[at]));
      i += 1;
    }

    std::vector<bool> mask(tgt.size(), false);
    for (std::size_t t = 0; t < tgt.size(); ++t) {
      if (!rng.bernoulli(cfg.noise_rate)) continue;
      const int orig = tgt_index.at(tgt[t]);
      int d = static_cast<int>(
          rng.uniform_int(static_cast<std::uint64_t>(corpus.tgt_tokens.size() - 1)));
      if (d >= orig) ++d;
      tgt[t] = corpus.tgt_tokens[static_cast<std::size_t>(d)];
      mask[t] = true;
    }

    std::vector<std::string> src_surfaces;
    src_surfaces.reserve(src.size());
    for (int t : src) src_surfaces.push_back("s" + std::to_string(t));

    ParallelPair pair;
    pair.source = make_sentence(src_surfaces);
    pair.reference = make_sentence(tgt);
    pair.alignment = std::move(align);
    corpus.pairs.push_back(std::move(pair));
    corpus.noise_mask.push_back(std::move(mask));
  }
  return corpus;
}

std::string synthetic_pos_tag(const std::string& surface) {
  if (surface.empty()) return "SYM";
  const char head = surface[0];
  if (head == 'm' || head == 'u' || head == 'v') return "NN";
  if (head == 't') {
    int idx = 0;
    bool any = false;
    for (std::size_t i = 1; i < surface.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(surface[i]))) {
        any = false;
        break;
      }
      idx = idx * 10 + (surface[i] - '0');
      any = true;
    }
    if (any) {
      static const char* kTags[5] = {"NN", "VBZ", "JJ", "IN", "DT"};
      return kTags[idx % 5];
    }
  }
  return "SYM";
}

}  // namespace infercal
